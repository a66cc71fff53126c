#include "dfbench/eval/predict.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "dfbench/data/image.hpp"
#include "dfbench/errors.hpp"

namespace dfbench::eval {

std::string to_string(Aggregation agg) {
  switch (agg) {
    case Aggregation::mean:
      return "mean";
    case Aggregation::max:
      return "max";
    case Aggregation::majority:
      return "majority";
  }
  return "mean";
}

Aggregation parse_aggregation(const std::string& name) {
  if (name == "mean") return Aggregation::mean;
  if (name == "max") return Aggregation::max;
  if (name == "majority") return Aggregation::majority;
  throw ConfigError("unknown aggregation '" + name + "' (mean, max, majority)");
}

double aggregate(const std::vector<double>& s, Aggregation agg, double threshold) {
  if (s.empty()) throw ConfigError("aggregate: no frame scores");
  switch (agg) {
    case Aggregation::max:
      return *std::max_element(s.begin(), s.end());
    case Aggregation::majority: {
      const auto votes = std::count_if(s.begin(), s.end(), [&](double v) { return v >= threshold; });
      return static_cast<double>(votes) / static_cast<double>(s.size());
    }
    case Aggregation::mean:
      break;
  }
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

Scorer detector_scorer(model::Detector& detector) {
  return [&detector](const Tensor& images) {
    detector.set_training(false);
    nn::NoGradGuard no_grad;
    return model::fake_probabilities(detector.forward(nn::Var(images)).logits.value());
  };
}

Scorer combined_scorer(model::Detector& a, model::Detector& b, model::CombineMode mode) {
  return [sa = detector_scorer(a), sb = detector_scorer(b), mode](const Tensor& images) {
    const auto pa = sa(images);
    const auto pb = sb(images);
    std::vector<double> out(pa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = model::combine_scores(pa[i], pb[i], mode);
    return out;
  };
}

std::vector<PredictionRecord> predict_manifest(const data::Manifest& manifest, const Scorer& scorer,
                                               std::size_t image_size, const PredictOptions& options,
                                               std::vector<FrameScore>* frame_scores) {
  if (options.frames == 0) throw ConfigError("frames per video must be >= 1");
  if (!(options.threshold >= 0.0 && options.threshold <= 1.0)) {
    throw ConfigError("threshold must be in [0,1]");
  }
  std::vector<PredictionRecord> out;
  for (const auto& e : manifest.entries) {
    if (!options.all_splits && e.split != options.split) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const auto idx = data::sample_frame_indices(e.frames.size(), options.frames);
    Tensor batch({idx.size(), 3, image_size, image_size});
    const std::size_t chunk = 3 * image_size * image_size;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Tensor img = data::resize_normalize(manifest.frame_path(e, idx[i]), image_size);
      std::copy(img.values().begin(), img.values().end(), batch.data() + i * chunk);
    }
    const auto scores = scorer(batch);
    PredictionRecord r;
    r.sample_id = e.sample_id;
    r.score = std::clamp(aggregate(scores, options.aggregation, options.threshold), 0.0, 1.0);
    r.true_label = e.label;
    r.method = e.method;
    r.latency_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(r);
    if (frame_scores) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        frame_scores->push_back({e.sample_id, e.frames[idx[i]], scores[i]});
      }
    }
  }
  return out;
}

}  // namespace dfbench::eval

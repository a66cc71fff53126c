#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dfbench/data/manifest.hpp"
#include "dfbench/eval/metrics.hpp"
#include "dfbench/model/genconvit.hpp"

namespace dfbench::eval {

// Frame-to-video rule.
enum class Aggregation { mean, max, majority };
std::string to_string(Aggregation agg);
Aggregation parse_aggregation(const std::string& name);

// majority: fraction of frames scoring >= threshold. ConfigError when empty.
double aggregate(const std::vector<double>& frame_scores, Aggregation agg,
                 double threshold = kDefaultThreshold);

// Fake probability for each image of an [N,3,S,S] batch.
using Scorer = std::function<std::vector<double>(const Tensor& images)>;

Scorer detector_scorer(model::Detector& detector);
// Per-frame combination of two networks' fake probabilities.
Scorer combined_scorer(model::Detector& a, model::Detector& b, model::CombineMode mode);

struct FrameScore {
  std::string sample_id;
  std::string frame;
  double score = 0.0;
};

struct PredictOptions {
  std::size_t frames = 15;
  Aggregation aggregation = Aggregation::mean;
  double threshold = kDefaultThreshold;
  data::Split split = data::Split::test;
  bool all_splits = false;
};

// One record per manifest entry (in manifest order) of the chosen split;
// latency covers frame loading and scoring. Per-frame scores go to
// `frame_scores` when given.
std::vector<PredictionRecord> predict_manifest(const data::Manifest& manifest, const Scorer& scorer,
                                               std::size_t image_size, const PredictOptions& options,
                                               std::vector<FrameScore>* frame_scores = nullptr);

}  // namespace dfbench::eval

#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dfbench/data/image.hpp"
#include "dfbench/nn/ops.hpp"

namespace dfbench::testing {

namespace fs = std::filesystem;

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

Tensor blob_image(std::size_t size, bool fake, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double s = static_cast<double>(size);
  const double cx = s * (0.3 + 0.4 * u(rng)), cy = s * (0.3 + 0.4 * u(rng)), r = s * 0.2;
  Tensor img({3, size, size});
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const bool inside = dx * dx + dy * dy < r * r;
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = inside ? (fake ? 0.9 : 0.1) : 0.5 + 0.05 * (u(rng) - 0.5);
        img[(c * size + y) * size + x] = v;
      }
    }
  }
  return img;
}

train::Dataset blob_dataset(std::size_t n, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  train::Dataset out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool fake = i % 2 == 1;
    out.push_back({blob_image(size, fake, rng), fake ? 1 : 0, "blob" + std::to_string(i),
                   fake ? "blob" : data::kOriginalMethod});
  }
  return out;
}

void write_synthetic_corpus(const fs::path& root, const CorpusSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  auto write_clip = [&](const fs::path& dir, bool fake) {
    fs::create_directories(dir);
    for (std::size_t f = 0; f < spec.frames_per_clip; ++f) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%03zu.png", f);
      data::save_image(blob_image(spec.image_size, fake, rng), dir / name);
    }
  };
  for (std::size_t i = 0; i < spec.real_clips; ++i) {
    write_clip(root / "real" / ("clip" + std::to_string(i)), false);
  }
  for (const auto& m : spec.fake_methods) {
    for (std::size_t i = 0; i < spec.fake_clips_per_method; ++i) {
      write_clip(root / "fake" / m / ("clip" + std::to_string(i)), true);
    }
  }
}

double op_grad_error(const std::function<nn::Var(const nn::Var&)>& op, const Tensor& x,
                     std::uint64_t seed, double eps, double floor) {
  std::mt19937_64 rng(seed);
  nn::Var probe(x, true);
  const nn::Var y = op(probe);
  const Tensor weights = random_tensor(y.shape(), rng);
  auto objective = [&](const nn::Var& out) { return nn::sum(nn::mul(out, nn::Var(weights))); };
  objective(y).backward();
  const Tensor analytic = probe.grad().empty() ? Tensor(x.shape()) : probe.grad();

  nn::NoGradGuard guard;
  double worst = 0.0;
  Tensor shifted = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    shifted[i] = x[i] + eps;
    const double up = objective(op(nn::Var(shifted))).value().item();
    shifted[i] = x[i] - eps;
    const double down = objective(op(nn::Var(shifted))).value().item();
    shifted[i] = x[i];
    const double numeric = (up - down) / (2 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

std::vector<eval::PredictionRecord> random_records(std::size_t n, std::mt19937_64& rng,
                                                   bool coarse_scores) {
  static const std::vector<std::string> methods = {"facefusion_gan", "retalking", "wav2lip"};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<eval::PredictionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    eval::PredictionRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.true_label = u(rng) < 0.5 ? data::Label::fake : data::Label::real;
    r.method = r.true_label == data::Label::fake ? methods[rng() % methods.size()] : data::kOriginalMethod;
    r.score = coarse_scores ? std::round(u(rng) * 10.0) / 10.0 : u(rng);
    r.latency_seconds = u(rng);
    out.push_back(r);
  }
  return out;
}

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("dfbench_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace dfbench::testing

#include "dfbench/model/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>

#include "dfbench/errors.hpp"
#include "dfbench/nn/ops.hpp"

namespace dfbench::model {

using dfbench::to_string;

using nn::Var;

void Meso4Config::validate() const {
  if (widths.size() != 4 || kernels.size() != 4 || pools.size() != 4) {
    throw ConfigError("Meso4Config: exactly four conv blocks");
  }
  std::size_t total_pool = 1;
  for (auto p : pools) total_pool *= p;
  if (input_size == 0 || input_size % total_pool != 0) {
    throw ShapeError("Meso4Config: input size " + std::to_string(input_size) +
                     " not divisible by total pooling " + std::to_string(total_pool));
  }
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("Meso4Config: bad slope");
}

std::size_t Meso4Config::flattened_dim() const {
  std::size_t side = input_size;
  for (auto p : pools) side /= p;
  return widths.back() * side * side;
}

nlohmann::json Meso4Config::to_json() const {
  return {{"input_size", input_size}, {"input_channels", input_channels},
          {"widths", widths},         {"kernels", kernels},
          {"pools", pools},           {"hidden", hidden},
          {"leaky_slope", leaky_slope}};
}

Meso4Config Meso4Config::for_preset(ScalePreset preset) {
  Meso4Config c;
  c.input_size = preset == ScalePreset::desk ? 64 : 256;
  return c;
}

Meso4::Meso4(const Meso4Config& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
  cfg_.validate();
  std::size_t in = cfg_.input_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t k = cfg_.kernels[i];
    convs_.push_back(std::make_unique<nn::Conv2d>(
        in, cfg_.widths[i], nn::Conv2dOptions{.kernel = k, .stride = 1, .padding = k / 2}, rng_));
    bns_.push_back(std::make_unique<nn::BatchNorm2d>(cfg_.widths[i]));
    register_module("conv" + std::to_string(i), *convs_.back());
    register_module("bn" + std::to_string(i), *bns_.back());
    in = cfg_.widths[i];
  }
  fc1_ = std::make_unique<nn::Linear>(cfg_.flattened_dim(), cfg_.hidden, rng_);
  fc2_ = std::make_unique<nn::Linear>(cfg_.hidden, 2, rng_);
  register_module("fc1", *fc1_);
  register_module("fc2", *fc2_);
}

DetectorOutput Meso4::forward(const Var& images) {
  require_image_batch(images, cfg_.input_channels, cfg_.input_size, "meso4");
  Var h = images;
  for (std::size_t i = 0; i < 4; ++i) {
    h = bns_[i]->forward(nn::relu(convs_[i]->forward(h)));
    h = nn::max_pool2d(h, cfg_.pools[i], cfg_.pools[i]);
  }
  h = nn::reshape(h, {images.dim(0), cfg_.flattened_dim()});
  DetectorOutput out;
  out.logits = fc2_->forward(nn::leaky_relu(fc1_->forward(h), cfg_.leaky_slope));
  return out;
}

Tensor spsl_phase_features(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("spsl_phase_features: expected [3,H,W], got " + to_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2), hw = h * w;
  if (h % 2 || w % 2) throw ShapeError("spsl_phase_features: H and W must be even");

  cv::Mat gray(static_cast<int>(h), static_cast<int>(w), CV_64F);
  for (std::size_t i = 0; i < hw; ++i) {
    gray.at<double>(static_cast<int>(i)) =
        0.299 * image[i] + 0.587 * image[hw + i] + 0.114 * image[2 * hw + i];
  }
  cv::Mat spectrum;
  cv::dft(gray, spectrum, cv::DFT_COMPLEX_OUTPUT);

  double peak = 0.0;
  for (int i = 0; i < spectrum.rows * spectrum.cols; ++i) {
    const auto& c = spectrum.at<cv::Vec2d>(i);
    peak = std::max(peak, std::hypot(c[0], c[1]));
  }
  const double floor = peak * 1e-9;
  for (int i = 0; i < spectrum.rows * spectrum.cols; ++i) {
    auto& c = spectrum.at<cv::Vec2d>(i);
    const double mag = std::hypot(c[0], c[1]);
    if (mag <= floor || mag == 0.0) {
      c = cv::Vec2d(0.0, 0.0);
    } else {
      c = cv::Vec2d(c[0] / mag, c[1] / mag);
    }
  }
  cv::Mat phase_image;
  cv::dft(spectrum, phase_image, cv::DFT_INVERSE | cv::DFT_REAL_OUTPUT | cv::DFT_SCALE);

  double lo = 0.0, hi = 0.0;
  cv::minMaxLoc(phase_image, &lo, &hi);
  Tensor out({4, h, w});
  std::copy(image.values().begin(), image.values().end(), out.values().begin());
  const double range = hi - lo;
  for (std::size_t i = 0; i < hw; ++i) {
    const double v = phase_image.at<double>(static_cast<int>(i));
    out[3 * hw + i] = range > 1e-12 ? (v - lo) / range : 0.0;
  }
  return out;
}

SpslMeso4::SpslMeso4(ScalePreset preset, std::uint64_t seed)
    : meso_(
          [&] {
            Meso4Config c = Meso4Config::for_preset(preset);
            c.input_channels = 4;
            return c;
          }(),
          seed) {
  register_module("meso4", meso_);
}

DetectorOutput SpslMeso4::forward(const Var& images) {
  require_image_batch(images, 3, input_size(), "spsl_meso4");
  const std::size_t n = images.dim(0), s = input_size();
  const std::size_t chunk = 3 * s * s;
  Tensor augmented({n, 4, s, s});
  for (std::size_t b = 0; b < n; ++b) {
    Tensor one({3, s, s}, std::vector<double>(images.value().data() + b * chunk,
                                              images.value().data() + (b + 1) * chunk));
    const Tensor feat = spsl_phase_features(one);
    std::copy(feat.values().begin(), feat.values().end(), augmented.data() + b * 4 * s * s);
  }
  return meso_.forward(Var(std::move(augmented)));
}

nlohmann::json SpslMeso4::config() const {
  return {{"spsl_meso4", meso_.config().at("meso4")}};
}

}  // namespace dfbench::model

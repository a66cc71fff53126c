#include "dfbench/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgproc.hpp>
#include <set>

#include "dfbench/errors.hpp"
#include "dfbench/random.hpp"
#include "image_mat.hpp"

namespace dfbench::data {

using dfbench::to_string;

namespace {

const std::vector<std::pair<Transform, const char*>> kNames = {
    {Transform::rotate, "rotate"},
    {Transform::transpose, "transpose"},
    {Transform::hflip, "hflip"},
    {Transform::vflip, "vflip"},
    {Transform::gauss_noise, "gauss_noise"},
    {Transform::shift_scale_rotate, "shift_scale_rotate"},
    {Transform::clahe, "clahe"},
    {Transform::sharpen, "sharpen"},
    {Transform::emboss, "emboss"},
    {Transform::brightness_contrast, "brightness_contrast"},
    {Transform::hue_saturation, "hue_saturation"},
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void clip01(Tensor& t) {
  for (auto& v : t.values()) v = std::clamp(v, 0.0, 1.0);
}

// Index remap on [3,H,W]: out(c,y,x) = in(c, src(y,x)).
template <typename F>
Tensor remap(const Tensor& img, std::size_t oh, std::size_t ow, F src) {
  const std::size_t h = img.dim(1), w = img.dim(2);
  Tensor out({3, oh, ow});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const auto [sy, sx] = src(y, x);
        out[(c * oh + y) * ow + x] = img[(c * h + sy) * w + sx];
      }
    }
  }
  return out;
}

Tensor filter_blend(const Tensor& img, const cv::Mat& kernel, double alpha) {
  cv::Mat m = to_mat(img), filtered;
  cv::filter2D(m, filtered, -1, kernel, cv::Point(-1, -1), 0, cv::BORDER_REFLECT_101);
  cv::addWeighted(m, 1.0 - alpha, filtered, alpha, 0.0, filtered);
  return from_mat(filtered);
}

}  // namespace

const std::vector<Transform>& all_transforms() {
  static const std::vector<Transform> all = [] {
    std::vector<Transform> v;
    for (const auto& [t, _] : kNames) v.push_back(t);
    return v;
  }();
  return all;
}

std::string to_string(Transform t) {
  for (const auto& [k, name] : kNames) {
    if (k == t) return name;
  }
  return "unknown";
}

Transform parse_transform(const std::string& name) {
  for (const auto& [k, n] : kNames) {
    if (name == n) return k;
  }
  throw ConfigError("unknown transform '" + name + "'");
}

void AugmentationConfig::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("augmentation rate must be in [0,1]");
  if (enabled.empty()) throw ConfigError("augmentation needs at least one enabled transform");
  std::set<Transform> seen(enabled.begin(), enabled.end());
  if (seen.size() != enabled.size()) throw ConfigError("duplicate transform in augmentation config");
}

Tensor apply_transform(const Tensor& image, Transform t, std::mt19937_64& rng,
                       const AugmentMagnitudes& mag) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("augment: expected [3,H,W], got " + to_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  Tensor out;
  switch (t) {
    case Transform::rotate: {
      if (h != w) return image;
      const int k = std::uniform_int_distribution<int>(1, 3)(rng);
      out = remap(image, h, w, [&](std::size_t y, std::size_t x) -> std::pair<std::size_t, std::size_t> {
        switch (k) {
          case 1:
            return {x, w - 1 - y};
          case 2:
            return {h - 1 - y, w - 1 - x};
          default:
            return {h - 1 - x, y};
        }
      });
      break;
    }
    case Transform::transpose:
      if (h != w) return image;
      out = remap(image, w, h, [](std::size_t y, std::size_t x) { return std::pair{x, y}; });
      break;
    case Transform::hflip:
      out = remap(image, h, w, [&](std::size_t y, std::size_t x) { return std::pair{y, w - 1 - x}; });
      break;
    case Transform::vflip:
      out = remap(image, h, w, [&](std::size_t y, std::size_t x) { return std::pair{h - 1 - y, x}; });
      break;
    case Transform::gauss_noise: {
      const double sigma = uniform(rng, 0.2 * mag.noise_sigma, mag.noise_sigma);
      std::normal_distribution<double> noise(0.0, sigma);
      out = image;
      for (auto& v : out.values()) v += noise(rng);
      break;
    }
    case Transform::shift_scale_rotate: {
      const double angle = uniform(rng, -mag.rotate_deg, mag.rotate_deg);
      const double scale = uniform(rng, mag.scale_lo, mag.scale_hi);
      const double dx = uniform(rng, -mag.shift, mag.shift) * static_cast<double>(w);
      const double dy = uniform(rng, -mag.shift, mag.shift) * static_cast<double>(h);
      const cv::Point2f centre(static_cast<float>(w) / 2.0f, static_cast<float>(h) / 2.0f);
      cv::Mat affine = cv::getRotationMatrix2D(centre, angle, scale);
      affine.at<double>(0, 2) += dx;
      affine.at<double>(1, 2) += dy;
      cv::Mat m = to_mat(image), warped;
      cv::warpAffine(m, warped, affine, m.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
      out = from_mat(warped);
      break;
    }
    case Transform::clahe: {
      cv::Mat rgb8, lab;
      to_mat(image).convertTo(rgb8, CV_8UC3, 255.0);
      cv::cvtColor(rgb8, lab, cv::COLOR_RGB2Lab);
      std::vector<cv::Mat> ch;
      cv::split(lab, ch);
      auto clahe = cv::createCLAHE(mag.clahe_clip, cv::Size(mag.clahe_tiles, mag.clahe_tiles));
      clahe->apply(ch[0], ch[0]);
      cv::merge(ch, lab);
      cv::cvtColor(lab, rgb8, cv::COLOR_Lab2RGB);
      cv::Mat back;
      rgb8.convertTo(back, CV_64FC3, 1.0 / 255.0);
      out = from_mat(back);
      break;
    }
    case Transform::sharpen: {
      const double alpha = uniform(rng, 0.2, mag.sharpen_alpha);
      const cv::Mat k = (cv::Mat_<double>(3, 3) << 0, -1, 0, -1, 5, -1, 0, -1, 0);
      out = filter_blend(image, k, alpha);
      break;
    }
    case Transform::emboss: {
      const double alpha = uniform(rng, 0.2, mag.emboss_alpha);
      const double s = uniform(rng, 0.2, 0.7);
      const cv::Mat k = (cv::Mat_<double>(3, 3) << -1 - s, -s, 0, -s, 1, s, 0, s, 1 + s);
      out = filter_blend(image, k, alpha);
      break;
    }
    case Transform::brightness_contrast: {
      const double b = uniform(rng, -mag.brightness, mag.brightness);
      const double c = uniform(rng, -mag.contrast, mag.contrast);
      out = image;
      for (auto& v : out.values()) v = v * (1.0 + c) + b;
      break;
    }
    case Transform::hue_saturation: {
      const double dh = uniform(rng, -mag.hue_deg, mag.hue_deg);
      const double ds = uniform(rng, -mag.saturation, mag.saturation);
      const double dv = uniform(rng, -mag.value, mag.value);
      cv::Mat rgb32, hsv;
      to_mat(image).convertTo(rgb32, CV_32FC3);
      cv::cvtColor(rgb32, hsv, cv::COLOR_RGB2HSV);  // H in [0,360)
      for (int i = 0; i < hsv.rows * hsv.cols; ++i) {
        auto& px = hsv.at<cv::Vec3f>(i);
        px[0] = static_cast<float>(std::fmod(px[0] + dh + 360.0, 360.0));
        px[1] = static_cast<float>(std::clamp(px[1] * (1.0 + ds), 0.0, 1.0));
        px[2] = static_cast<float>(px[2] * (1.0 + dv));
      }
      cv::cvtColor(hsv, rgb32, cv::COLOR_HSV2RGB);
      out = from_mat(rgb32);
      break;
    }
  }
  clip01(out);
  return out;
}

std::vector<Transform> draw_chain(const AugmentationConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(seed, {0xa11ULL}));
  std::vector<Transform> chain;
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) >= cfg.rate) return chain;
  std::bernoulli_distribution pick(0.5);
  for (auto t : cfg.enabled) {
    if (pick(rng)) chain.push_back(t);
  }
  if (chain.empty()) {
    chain.push_back(cfg.enabled[std::uniform_int_distribution<std::size_t>(0, cfg.enabled.size() - 1)(rng)]);
  }
  std::sort(chain.begin(), chain.end());
  return chain;
}

Tensor augment(const Tensor& image, const AugmentationConfig& cfg, std::uint64_t seed) {
  const auto chain = draw_chain(cfg, seed);
  if (chain.empty()) return image;
  std::mt19937_64 rng(derive_seed(seed, {0xa12ULL}));
  Tensor out = image;
  for (auto t : chain) out = apply_transform(out, t, rng, cfg.magnitudes);
  return out;
}

}  // namespace dfbench::data

#include "dfbench/data/image.hpp"

#include <algorithm>
#include <vector>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dfbench/errors.hpp"
#include "../fs_util.hpp"
#include "image_mat.hpp"

namespace dfbench::data {

namespace fs = std::filesystem;

cv::Mat to_mat(const Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) {
    throw ShapeError("expected a [3,H,W] image, got " + to_string(chw.shape()));
  }
  const int h = static_cast<int>(chw.dim(1)), w = static_cast<int>(chw.dim(2));
  const std::size_t hw = chw.dim(1) * chw.dim(2);
  cv::Mat m(h, w, CV_64FC3);
  auto* p = m.ptr<double>();
  for (std::size_t i = 0; i < hw; ++i) {
    p[3 * i] = chw[i];
    p[3 * i + 1] = chw[hw + i];
    p[3 * i + 2] = chw[2 * hw + i];
  }
  return m;
}

Tensor from_mat(const cv::Mat& rgb) {
  cv::Mat m;
  if (rgb.type() == CV_64FC3) {
    m = rgb.isContinuous() ? rgb : rgb.clone();
  } else {
    rgb.convertTo(m, CV_64FC3);
  }
  const std::size_t h = m.rows, w = m.cols, hw = h * w;
  Tensor out({3, h, w});
  const auto* p = m.ptr<double>();
  for (std::size_t i = 0; i < hw; ++i) {
    out[i] = p[3 * i];
    out[hw + i] = p[3 * i + 1];
    out[2 * hw + i] = p[3 * i + 2];
  }
  return out;
}

Tensor load_image(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw IoError("image not found: " + path.string());
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw FormatError("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat scaled;
  rgb.convertTo(scaled, CV_64FC3, 1.0 / 255.0);
  return from_mat(scaled);
}

Tensor resize_normalize(const fs::path& path, std::size_t target) {
  if (target == 0) throw ConfigError("resize target must be positive");
  return resize_bilinear(load_image(path), target);
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double w;  // weight of hi
};

// Half-pixel centres, edge-clamped; same sampling grid as cv::INTER_LINEAR.
std::vector<Tap> taps(std::size_t in, std::size_t out) {
  std::vector<Tap> t(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double src = std::max(0.0, (static_cast<double>(i) + 0.5) * scale - 0.5);
    const auto lo = std::min(static_cast<std::size_t>(src), in - 1);
    t[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return t;
}

}  // namespace

Tensor resize_bilinear(const Tensor& images, std::size_t size) {
  if (size == 0) throw ConfigError("resize target must be positive");
  if (images.rank() != 3 && images.rank() != 4) {
    throw ShapeError("resize_bilinear: expected [C,H,W] or [N,C,H,W], got " +
                     to_string(images.shape()));
  }
  const std::size_t r = images.rank();
  const std::size_t h = images.dim(r - 2), w = images.dim(r - 1);
  const std::size_t planes = images.size() / (h * w);
  Shape shape = images.shape();
  shape[r - 2] = size;
  shape[r - 1] = size;
  if (h == size && w == size) return images;
  Tensor out(shape);
  const auto ty = taps(h, size), tx = taps(w, size);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = images.data() + p * h * w;
    double* dst = out.data() + p * size * size;
    for (std::size_t y = 0; y < size; ++y) {
      const double* r0 = src + ty[y].lo * w;
      const double* r1 = src + ty[y].hi * w;
      const double wy = ty[y].w;
      for (std::size_t x = 0; x < size; ++x) {
        const auto& c = tx[x];
        const double top = r0[c.lo] + c.w * (r0[c.hi] - r0[c.lo]);
        const double bot = r1[c.lo] + c.w * (r1[c.hi] - r1[c.lo]);
        dst[y * size + x] = top + wy * (bot - top);
      }
    }
  }
  return out;
}

void save_image(const Tensor& image, const fs::path& path) {
  cv::Mat rgb = to_mat(image);
  cv::Mat rgb8;
  rgb.convertTo(rgb8, CV_8UC3, 255.0);
  cv::Mat bgr;
  cv::cvtColor(rgb8, bgr, cv::COLOR_RGB2BGR);
  detail::ensure_parent_dir(path);
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write image " + path.string());
}

}  // namespace dfbench::data

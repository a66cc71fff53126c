#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dfbench/tensor.hpp"

namespace dfbench::data {

enum class Transform {
  rotate,
  transpose,
  hflip,
  vflip,
  gauss_noise,
  shift_scale_rotate,
  clahe,
  sharpen,
  emboss,
  brightness_contrast,
  hue_saturation,
};

const std::vector<Transform>& all_transforms();
std::string to_string(Transform t);
Transform parse_transform(const std::string& name);  // ConfigError on unknown names

struct AugmentMagnitudes {
  double rotate_deg = 30.0;       // shift_scale_rotate angle bound
  double shift = 0.10;            // fraction of the side
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double noise_sigma = 0.05;
  double clahe_clip = 2.0;
  int clahe_tiles = 8;
  double sharpen_alpha = 0.5;     // blend upper bound
  double emboss_alpha = 0.5;
  double brightness = 0.2;
  double contrast = 0.2;
  double hue_deg = 10.0;
  double saturation = 0.2;
  double value = 0.2;
};

struct AugmentationConfig {
  double rate = 0.9;
  std::vector<Transform> enabled = all_transforms();
  AugmentMagnitudes magnitudes;
  std::uint64_t seed = 0;

  void validate() const;  // rate in [0,1], enabled non-empty without duplicates
};

// Applies one transform to a [3,H,W] image in [0,1]; the result is clipped to [0,1].
// rotate turns by a random multiple of 90 degrees; rotate and transpose leave
// non-square images untouched.
Tensor apply_transform(const Tensor& image, Transform t, std::mt19937_64& rng,
                       const AugmentMagnitudes& mag = {});

// Transforms that apply_transform would run for this seed (empty: untouched).
std::vector<Transform> draw_chain(const AugmentationConfig& cfg, std::uint64_t seed);

// With probability cfg.rate each enabled transform is picked with probability
// 1/2 (at least one), and the chain runs in declaration order.
Tensor augment(const Tensor& image, const AugmentationConfig& cfg, std::uint64_t seed);

}  // namespace dfbench::data

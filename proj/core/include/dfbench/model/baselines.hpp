#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dfbench/model/backbone.hpp"
#include "dfbench/model/detector.hpp"

namespace dfbench::model {

// MesoNet-style detector: four conv blocks (conv -> ReLU -> BN -> max pool)
// with widths 8/8/16/16, kernels 3/5/5/5 and pools 2/2/2/4, then a 16-unit
// LeakyReLU hidden layer and two logits.
struct Meso4Config {
  std::size_t input_size = 256;
  std::size_t input_channels = 3;
  std::vector<std::size_t> widths{8, 8, 16, 16};
  std::vector<std::size_t> kernels{3, 5, 5, 5};
  std::vector<std::size_t> pools{2, 2, 2, 4};
  std::size_t hidden = 16;
  double leaky_slope = 0.1;

  void validate() const;
  std::size_t flattened_dim() const;
  nlohmann::json to_json() const;
  static Meso4Config for_preset(ScalePreset preset);
};

class Meso4 : public Detector {
 public:
  Meso4(const Meso4Config& cfg, std::uint64_t seed);

  std::string name() const override { return "meso4"; }
  std::size_t input_size() const override { return cfg_.input_size; }
  std::size_t input_channels() const override { return cfg_.input_channels; }
  DetectorOutput forward(const nn::Var& images) override;
  nlohmann::json config() const override { return {{"meso4", cfg_.to_json()}}; }

 private:
  Meso4Config cfg_;
  nn::Rng rng_;
  std::vector<std::unique_ptr<nn::Conv2d>> convs_;
  std::vector<std::unique_ptr<nn::BatchNorm2d>> bns_;
  std::unique_ptr<nn::Linear> fc1_, fc2_;
};

// Appends a spectral-phase channel: grayscale -> 2-D DFT -> unit-magnitude
// spectrum (bins with negligible magnitude dropped) -> inverse DFT -> real part
// min-max scaled to [0, 1] (constant maps to 0). [3, H, W] -> [4, H, W];
// H and W must be even.
Tensor spsl_phase_features(const Tensor& image);

// Meso4 over RGB + phase channel. The published SPSL detector uses an Xception
// backbone, which is not bundled.
class SpslMeso4 : public Detector {
 public:
  SpslMeso4(ScalePreset preset, std::uint64_t seed);

  std::string name() const override { return "spsl_meso4"; }
  std::size_t input_size() const override { return meso_.input_size(); }
  DetectorOutput forward(const nn::Var& images) override;
  nlohmann::json config() const override;

 private:
  Meso4 meso_;
};

struct ModelOptions {
  ScalePreset preset = ScalePreset::desk;
  std::uint64_t seed = 0;
};

using DetectorFactory = std::function<std::unique_ptr<Detector>(const ModelOptions&)>;

// Name -> factory map; names are the CLI's --model vocabulary.
class DetectorRegistry {
 public:
  // Throws ConfigError on a duplicate name.
  void register_detector(const std::string& name, DetectorFactory factory);
  // Throws NotFoundError for unknown names.
  const DetectorFactory& get(const std::string& name) const;
  std::unique_ptr<Detector> create(const std::string& name, const ModelOptions& options) const;
  bool contains(const std::string& name) const { return factories_.count(name) > 0; }
  // Sorted.
  std::vector<std::string> list() const;

  // genconvit_ae, genconvit_vae, meso4, spsl_meso4, plus the reserved
  // xception / efficientnet_b4 / ucf names whose factories throw
  // NotBundledError.
  static DetectorRegistry with_builtin();

 private:
  std::map<std::string, DetectorFactory> factories_;
};

}  // namespace dfbench::model

#pragma once

#include <span>
#include <string>
#include <vector>

#include "dfbench/nn/layers.hpp"
#include "dfbench/nn/primitives.hpp"
#include "json.hpp"

namespace dfbench::model {

// Class index 1 is "fake" throughout.
inline constexpr int kRealLabel = 0;
inline constexpr int kFakeLabel = 1;

struct DetectorOutput {
  nn::Var logits;  // [N, 2]
  // Present only for networks that reconstruct their input.
  nn::Var reconstruction;
  nn::Var latent_mu;
  nn::Var latent_logvar;

  bool has_reconstruction() const { return reconstruction.defined(); }
};

struct NetworkLoss {
  nn::Var total;
  nn::LossValue breakdown;  // value == total, plus named components
};

// Common contract for everything the harness can train and benchmark:
// [N, C, S, S] images in [0, 1] -> two logits per sample.
class Detector : public nn::Module {
 public:
  virtual std::string name() const = 0;
  virtual std::size_t input_size() const = 0;
  virtual std::size_t input_channels() const { return 3; }
  virtual DetectorOutput forward(const nn::Var& images) = 0;
  // Cross entropy on the logits unless a network needs more.
  virtual NetworkLoss loss(const DetectorOutput& output, std::span<const int> labels,
                           const Tensor& images) const;
  virtual nlohmann::json config() const = 0;
};

// Row-wise softmax probability of the fake class.
std::vector<double> fake_probabilities(const Tensor& logits);

// Throws ShapeError unless images is [N, channels, size, size].
void require_image_batch(const nn::Var& images, std::size_t channels, std::size_t size,
                         const char* what);

}  // namespace dfbench::model

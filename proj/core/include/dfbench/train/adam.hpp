#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dfbench/nn/layers.hpp"

namespace dfbench::train {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Bias-corrected Adam without weight decay. Parameters with no accumulated
// gradient are left untouched and keep their moments.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, nn::Var>> params, AdamOptions options);

  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamOptions& options() const { return opt_; }

  // Moments keyed "m.<param>" / "v.<param>".
  nn::StateDict state() const;
  // FormatError on missing keys or shape mismatches.
  void load_state(const nn::StateDict& state, std::uint64_t step);

 private:
  std::vector<std::pair<std::string, nn::Var>> params_;
  std::vector<Tensor> m_, v_;
  AdamOptions opt_;
  std::uint64_t step_ = 0;
};

}  // namespace dfbench::train

#pragma once

#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dfbench/nn/autograd.hpp"

namespace dfbench::nn {

using Rng = std::mt19937_64;

// Owner of named parameters, buffers and child modules. Modules are pinned in
// memory (children are registered by address), so they are neither copyable
// nor movable; hold them by value inside a parent or through unique_ptr.
class Module {
 public:
  Module() = default;
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  // Dotted names ("encoder.conv0.weight") in registration order.
  std::vector<std::pair<std::string, Var>> named_parameters() const;
  std::vector<std::pair<std::string, Tensor*>> named_buffers() const;
  std::vector<Var> parameters() const;
  std::size_t parameter_count() const;

  void set_training(bool training);
  bool training() const { return training_; }
  void zero_grad();

 protected:
  Var register_parameter(std::string name, Tensor init);
  Tensor& register_buffer(std::string name, Tensor init);
  void register_module(std::string name, Module& child);

 private:
  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Var>>& out) const;
  void collect_buffers(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor*>>& out) const;

  std::vector<std::pair<std::string, Var>> params_;
  std::vector<std::pair<std::string, std::unique_ptr<Tensor>>> buffers_;
  std::vector<std::pair<std::string, Module*>> children_;
  bool training_ = true;
};

// Parameters and buffers keyed by dotted name.
using StateDict = std::map<std::string, Tensor>;

StateDict state_dict(const Module& module);
// Copies matching tensors into the module. Missing or extra keys and shape
// mismatches throw FormatError.
void load_state_dict(Module& module, const StateDict& state);

class Linear : public Module {
 public:
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng, bool bias = true);
  Var forward(const Var& x) const;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Var& weight() { return weight_; }

 private:
  std::size_t in_, out_;
  Var weight_, bias_;
};

struct Conv2dOptions {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
  bool bias = true;
};

class Conv2d : public Module {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, Conv2dOptions options, Rng& rng);
  Var forward(const Var& x) const;

  std::size_t out_channels() const { return out_; }
  Var& weight() { return weight_; }

 private:
  std::size_t out_;
  Conv2dOptions opt_;
  Var weight_, bias_;
};

class ConvTranspose2d : public Module {
 public:
  ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                  std::size_t stride, std::size_t padding, Rng& rng);
  Var forward(const Var& x) const;

 private:
  std::size_t stride_, padding_;
  Var weight_, bias_;
};

class BatchNorm2d : public Module {
 public:
  explicit BatchNorm2d(std::size_t channels, double momentum = 0.1, double eps = 1e-5);
  Var forward(const Var& x);

 private:
  double momentum_, eps_;
  Var gamma_, beta_;
  Tensor* running_mean_;
  Tensor* running_var_;
};

class LayerNorm : public Module {
 public:
  explicit LayerNorm(std::size_t features, double eps = 1e-6);
  Var forward(const Var& x) const;

 private:
  double eps_;
  Var gamma_, beta_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace dfbench::nn

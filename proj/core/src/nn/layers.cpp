#include "dfbench/nn/layers.hpp"

#include <cmath>

#include "dfbench/errors.hpp"
#include "dfbench/nn/ops.hpp"

namespace dfbench::nn {

std::vector<std::pair<std::string, Var>> Module::named_parameters() const {
  std::vector<std::pair<std::string, Var>> out;
  collect_parameters("", out);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Module::named_buffers() const {
  std::vector<std::pair<std::string, Tensor*>> out;
  collect_buffers("", out);
  return out;
}

std::vector<Var> Module::parameters() const {
  std::vector<Var> out;
  for (auto& [name, p] : named_parameters()) out.push_back(p);
  return out;
}

std::size_t Module::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value().size();
  return n;
}

void Module::set_training(bool training) {
  training_ = training;
  for (auto& [name, child] : children_) child->set_training(training);
}

void Module::zero_grad() {
  for (auto& p : parameters()) p.zero_grad();
}

Var Module::register_parameter(std::string name, Tensor init) {
  Var v(std::move(init), true);
  params_.emplace_back(std::move(name), v);
  return v;
}

Tensor& Module::register_buffer(std::string name, Tensor init) {
  buffers_.emplace_back(std::move(name), std::make_unique<Tensor>(std::move(init)));
  return *buffers_.back().second;
}

void Module::register_module(std::string name, Module& child) {
  children_.emplace_back(std::move(name), &child);
}

void Module::collect_parameters(const std::string& prefix,
                                std::vector<std::pair<std::string, Var>>& out) const {
  for (const auto& [name, p] : params_) out.emplace_back(prefix + name, p);
  for (const auto& [name, child] : children_) child->collect_parameters(prefix + name + ".", out);
}

void Module::collect_buffers(const std::string& prefix,
                             std::vector<std::pair<std::string, Tensor*>>& out) const {
  for (const auto& [name, b] : buffers_) out.emplace_back(prefix + name, b.get());
  for (const auto& [name, child] : children_) child->collect_buffers(prefix + name + ".", out);
}

StateDict state_dict(const Module& module) {
  StateDict out;
  for (const auto& [name, p] : module.named_parameters()) out.emplace(name, p.value());
  for (const auto& [name, b] : module.named_buffers()) out.emplace(name, *b);
  return out;
}

void load_state_dict(Module& module, const StateDict& state) {
  std::size_t used = 0;
  auto assign = [&](const std::string& name, Tensor& dst) {
    auto it = state.find(name);
    if (it == state.end()) throw FormatError("state dict is missing '" + name + "'");
    if (it->second.shape() != dst.shape()) {
      throw FormatError("state dict entry '" + name + "' has shape " +
                        to_string(it->second.shape()) + ", expected " + to_string(dst.shape()));
    }
    dst = it->second;
    ++used;
  };
  for (auto& [name, p] : module.named_parameters()) assign(name, p.mutable_value());
  for (auto& [name, b] : module.named_buffers()) assign(name, *b);
  if (used != state.size()) {
    throw FormatError("state dict has " + std::to_string(state.size() - used) +
                      " entries the module does not know");
  }
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng, bool bias)
    : in_(in_features), out_(out_features) {
  weight_ = register_parameter("weight", uniform_init({out_, in_}, in_, rng));
  if (bias) bias_ = register_parameter("bias", uniform_init({out_}, in_, rng));
}

Var Linear::forward(const Var& x) const { return linear(x, weight_, bias_); }

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, Conv2dOptions options,
               Rng& rng)
    : out_(out_channels), opt_(options) {
  if (opt_.groups == 0 || in_channels % opt_.groups || out_channels % opt_.groups) {
    throw ConfigError("Conv2d: channels not divisible by groups");
  }
  const std::size_t cin_g = in_channels / opt_.groups;
  const std::size_t fan_in = cin_g * opt_.kernel * opt_.kernel;
  weight_ = register_parameter(
      "weight", uniform_init({out_channels, cin_g, opt_.kernel, opt_.kernel}, fan_in, rng));
  if (opt_.bias) bias_ = register_parameter("bias", uniform_init({out_channels}, fan_in, rng));
}

Var Conv2d::forward(const Var& x) const {
  return conv2d(x, weight_, bias_, opt_.stride, opt_.padding, opt_.groups);
}

ConvTranspose2d::ConvTranspose2d(std::size_t in_channels, std::size_t out_channels,
                                 std::size_t kernel, std::size_t stride, std::size_t padding,
                                 Rng& rng)
    : stride_(stride), padding_(padding) {
  const std::size_t fan_in = out_channels * kernel * kernel;
  weight_ = register_parameter(
      "weight", uniform_init({in_channels, out_channels, kernel, kernel}, fan_in, rng));
  bias_ = register_parameter("bias", uniform_init({out_channels}, fan_in, rng));
}

Var ConvTranspose2d::forward(const Var& x) const {
  return conv_transpose2d(x, weight_, bias_, stride_, padding_);
}

BatchNorm2d::BatchNorm2d(std::size_t channels, double momentum, double eps)
    : momentum_(momentum), eps_(eps) {
  gamma_ = register_parameter("weight", Tensor({channels}, 1.0));
  beta_ = register_parameter("bias", Tensor({channels}, 0.0));
  running_mean_ = &register_buffer("running_mean", Tensor({channels}, 0.0));
  running_var_ = &register_buffer("running_var", Tensor({channels}, 1.0));
}

Var BatchNorm2d::forward(const Var& x) {
  return batch_norm2d(x, gamma_, beta_, *running_mean_, *running_var_, training(), momentum_,
                      eps_);
}

LayerNorm::LayerNorm(std::size_t features, double eps) : eps_(eps) {
  gamma_ = register_parameter("weight", Tensor({features}, 1.0));
  beta_ = register_parameter("bias", Tensor({features}, 0.0));
}

Var LayerNorm::forward(const Var& x) const { return layer_norm(x, gamma_, beta_, eps_); }

}  // namespace dfbench::nn

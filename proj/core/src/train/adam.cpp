#include "dfbench/train/adam.hpp"

#include <cmath>

#include "dfbench/errors.hpp"

namespace dfbench::train {

void AdamOptions::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0,1)");
  }
  if (!(eps > 0.0)) throw ConfigError("Adam eps must be > 0");
}

Adam::Adam(std::vector<std::pair<std::string, nn::Var>> params, AdamOptions options)
    : params_(std::move(params)), opt_(options) {
  opt_.validate();
  for (const auto& [_, p] : params_) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  }
}

void Adam::step() {
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(opt_.beta1, t);
  const double c2 = 1.0 - std::pow(opt_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    nn::Var& p = params_[i].second;
    const Tensor& g = p.grad();
    if (g.empty()) continue;
    Tensor& w = p.mutable_value();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * g[j];
      v[j] = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [_, p] : params_) p.zero_grad();
}

nn::StateDict Adam::state() const {
  nn::StateDict out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out["m." + params_[i].first] = m_[i];
    out["v." + params_[i].first] = v_[i];
  }
  return out;
}

void Adam::load_state(const nn::StateDict& state, std::uint64_t step) {
  if (state.size() != 2 * params_.size()) {
    throw FormatError("optimizer state has " + std::to_string(state.size()) + " entries, expected " +
                      std::to_string(2 * params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (auto* slot : {&m_[i], &v_[i]}) {
      const std::string key = (slot == &m_[i] ? "m." : "v.") + params_[i].first;
      const auto it = state.find(key);
      if (it == state.end()) throw FormatError("optimizer state lacks '" + key + "'");
      if (!it->second.same_shape(*slot)) throw FormatError("optimizer state shape mismatch for '" + key + "'");
      *slot = it->second;
    }
  }
  step_ = step;
}

}  // namespace dfbench::train

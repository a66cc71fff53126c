#include <cmath>

#include "dfbench/errors.hpp"
#include "dfbench/model/baselines.hpp"
#include "dfbench/model/genconvit.hpp"
#include "dfbench/nn/ops.hpp"

namespace dfbench::model {

using dfbench::to_string;

NetworkLoss Detector::loss(const DetectorOutput& output, std::span<const int> labels,
                           const Tensor&) const {
  NetworkLoss loss;
  loss.total = nn::cross_entropy_with_logits(output.logits, labels);
  loss.breakdown.value = loss.total.value().item();
  loss.breakdown.components["ce"] = loss.breakdown.value;
  return loss;
}

std::vector<double> fake_probabilities(const Tensor& logits) {
  if (logits.rank() != 2 || logits.dim(1) != 2) {
    throw ShapeError("fake_probabilities: expected [N,2] logits, got " + to_string(logits.shape()));
  }
  std::vector<double> out(logits.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    // softmax over two classes == sigmoid of the logit difference
    out[i] = nn::sigmoid(logits[2 * i + 1] - logits[2 * i]);
  }
  return out;
}

void require_image_batch(const nn::Var& images, std::size_t channels, std::size_t size,
                         const char* what) {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != channels || s[2] != size || s[3] != size) {
    throw ShapeError(std::string(what) + ": expected [N," + std::to_string(channels) + "," +
                     std::to_string(size) + "," + std::to_string(size) + "] images, got " +
                     to_string(s));
  }
}

void DetectorRegistry::register_detector(const std::string& name, DetectorFactory factory) {
  if (name.empty()) throw ConfigError("detector name must not be empty");
  if (!factories_.emplace(name, std::move(factory)).second) {
    throw ConfigError("detector '" + name + "' is already registered");
  }
}

const DetectorFactory& DetectorRegistry::get(const std::string& name) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw NotFoundError("unknown detector '" + name + "'");
  return it->second;
}

std::unique_ptr<Detector> DetectorRegistry::create(const std::string& name,
                                                   const ModelOptions& options) const {
  return get(name)(options);
}

std::vector<std::string> DetectorRegistry::list() const {
  std::vector<std::string> names;
  for (const auto& [name, f] : factories_) names.push_back(name);
  return names;
}

DetectorRegistry DetectorRegistry::with_builtin() {
  DetectorRegistry r;
  r.register_detector("genconvit_ae", [](const ModelOptions& o) -> std::unique_ptr<Detector> {
    return std::make_unique<NetworkA>(GenConViTConfig::for_preset(o.preset), o.seed);
  });
  r.register_detector("genconvit_vae", [](const ModelOptions& o) -> std::unique_ptr<Detector> {
    return std::make_unique<NetworkB>(GenConViTConfig::for_preset(o.preset), o.seed);
  });
  r.register_detector("meso4", [](const ModelOptions& o) -> std::unique_ptr<Detector> {
    return std::make_unique<Meso4>(Meso4Config::for_preset(o.preset), o.seed);
  });
  r.register_detector("spsl_meso4", [](const ModelOptions& o) -> std::unique_ptr<Detector> {
    return std::make_unique<SpslMeso4>(o.preset, o.seed);
  });
  for (const char* reserved : {"xception", "efficientnet_b4", "ucf"}) {
    const std::string name = reserved;
    r.register_detector(name, [name](const ModelOptions&) -> std::unique_ptr<Detector> {
      throw NotBundledError("detector '" + name +
                            "' is not bundled; provide an external plug-in and register it");
    });
  }
  return r;
}

}  // namespace dfbench::model

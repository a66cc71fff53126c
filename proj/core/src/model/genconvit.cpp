#include "dfbench/model/genconvit.hpp"

#include <algorithm>
#include <cmath>

#include "dfbench/data/image.hpp"
#include "dfbench/errors.hpp"
#include "dfbench/nn/ops.hpp"

namespace dfbench::model {

using dfbench::to_string;

using nn::Var;

namespace {

bool is_power_of_two(std::size_t v) { return v && !(v & (v - 1)); }

std::size_t log2_exact(std::size_t v) {
  std::size_t k = 0;
  while ((std::size_t{1} << k) < v) ++k;
  return k;
}

nlohmann::json backbone_to_json(const BackboneConfig& b) {
  return {{"kind", b.kind == BackboneKind::swin_like ? "swin_like" : "convnext_like"},
          {"depth", b.depth},
          {"width", b.width},
          {"window", b.window},
          {"heads", b.heads},
          {"patch", b.patch},
          {"scale_preset", to_string(b.scale_preset)}};
}

BackboneConfig backbone_from_json(const nlohmann::json& j) {
  BackboneConfig b;
  b.kind = j.at("kind").get<std::string>() == "swin_like" ? BackboneKind::swin_like
                                                           : BackboneKind::convnext_like;
  b.depth = j.at("depth").get<std::vector<std::size_t>>();
  b.width = j.at("width").get<std::vector<std::size_t>>();
  b.window = j.at("window").get<std::size_t>();
  b.heads = j.at("heads").get<std::size_t>();
  b.patch = j.at("patch").get<std::size_t>();
  b.scale_preset = parse_scale_preset(j.at("scale_preset").get<std::string>());
  return b;
}

// Two-layer MLP head over concatenated backbone features.
Var head(const nn::Linear& fc1, const nn::Linear& fc2, const Var& features, bool use_gelu) {
  auto act = [use_gelu](const Var& v) { return use_gelu ? nn::gelu(v) : nn::relu(v); };
  return fc2.forward(act(fc1.forward(act(features))));
}

}  // namespace

void AEConfig::validate() const {
  if (encoder_channels.size() != 5) throw ConfigError("AEConfig: exactly 5 encoder stages required");
  if (input_channels == 0 || kernel == 0) throw ConfigError("AEConfig: zero channels or kernel");
  if (input_size == 0 || input_size % 32 != 0) {
    throw ShapeError("AEConfig: input size " + std::to_string(input_size) +
                     " cannot be halved 5 times to an integer side");
  }
}

std::size_t AEConfig::latent_side() const { return input_size / 32; }

Shape AEConfig::latent_shape() const {
  return {encoder_channels.back(), latent_side(), latent_side()};
}

void VAEConfig::validate() const {
  if (encoder_channels.size() != 4) throw ConfigError("VAEConfig: exactly 4 encoder stages required");
  if (input_size == 0 || input_size % 16 != 0) {
    throw ShapeError("VAEConfig: input size " + std::to_string(input_size) +
                     " cannot be halved 4 times to an integer side");
  }
  if (flattened_dim() != latent_dim) {
    throw ConfigError("VAEConfig: encoder output flattens to " + std::to_string(flattened_dim()) +
                      ", latent_dim says " + std::to_string(latent_dim));
  }
  if (recon_size % latent_side() != 0 || !is_power_of_two(recon_size / latent_side()) ||
      recon_size <= latent_side()) {
    throw ShapeError("VAEConfig: recon size " + std::to_string(recon_size) +
                     " is not a power-of-two upsampling of latent side " +
                     std::to_string(latent_side()));
  }
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("VAEConfig: bad leaky slope");
}

std::size_t VAEConfig::latent_side() const { return input_size / 16; }

std::size_t VAEConfig::flattened_dim() const {
  return encoder_channels.back() * latent_side() * latent_side();
}

std::size_t VAEConfig::decoder_stages() const { return log2_exact(recon_size / latent_side()); }

GenConViTConfig GenConViTConfig::paper_tiny() {
  GenConViTConfig c;
  c.preset = ScalePreset::paper_tiny;
  c.hybrid.convnext = {.kind = BackboneKind::convnext_like,
                       .depth = {1},
                       .width = {96},
                       .window = 7,
                       .heads = 1,
                       .patch = 4,
                       .scale_preset = ScalePreset::paper_tiny};
  c.hybrid.swin = {.kind = BackboneKind::swin_like,
                   .depth = {2},
                   .width = {768},
                   .window = 7,
                   .heads = 12,
                   .patch = 1,
                   .scale_preset = ScalePreset::paper_tiny};
  c.hybrid.embed_dim = 768;
  c.hybrid.num_features = 1000;
  return c;
}

GenConViTConfig GenConViTConfig::desk() {
  GenConViTConfig c;
  c.preset = ScalePreset::desk;
  c.ae.input_size = 64;
  c.ae.encoder_channels = {8, 16, 32, 32, 32};
  c.vae.input_size = 64;
  c.vae.encoder_channels = {8, 16, 16, 16};
  c.vae.latent_dim = 16 * 4 * 4;
  c.vae.recon_size = 32;
  c.hybrid.convnext = {.kind = BackboneKind::convnext_like,
                       .depth = {1},
                       .width = {16},
                       .window = 4,
                       .heads = 1,
                       .patch = 4,
                       .scale_preset = ScalePreset::desk};
  c.hybrid.swin = {.kind = BackboneKind::swin_like,
                   .depth = {1},
                   .width = {64},
                   .window = 4,
                   .heads = 2,
                   .patch = 1,
                   .scale_preset = ScalePreset::desk};
  c.hybrid.embed_dim = 64;
  c.hybrid.num_features = 64;
  return c;
}

GenConViTConfig GenConViTConfig::for_preset(ScalePreset preset) {
  return preset == ScalePreset::desk ? desk() : paper_tiny();
}

void GenConViTConfig::validate() const {
  ae.validate();
  vae.validate();
  hybrid.validate();
  hybrid.check_input(ae.input_size);
  hybrid.check_input(vae.input_size);
  hybrid.check_input(vae.recon_size);
  if (loss.ce < 0 || loss.recon < 0 || loss.kl < 0) throw ConfigError("negative loss weight");
}

nlohmann::json GenConViTConfig::to_json() const {
  return {{"preset", to_string(preset)},
          {"ae",
           {{"input_size", ae.input_size},
            {"input_channels", ae.input_channels},
            {"encoder_channels", ae.encoder_channels},
            {"kernel", ae.kernel}}},
          {"vae",
           {{"input_size", vae.input_size},
            {"input_channels", vae.input_channels},
            {"encoder_channels", vae.encoder_channels},
            {"kernel", vae.kernel},
            {"latent_dim", vae.latent_dim},
            {"recon_size", vae.recon_size},
            {"leaky_slope", vae.leaky_slope}}},
          {"hybrid",
           {{"convnext", backbone_to_json(hybrid.convnext)},
            {"swin", backbone_to_json(hybrid.swin)},
            {"embed_dim", hybrid.embed_dim},
            {"num_features", hybrid.num_features}}},
          {"loss",
           {{"ce", loss.ce},
            {"recon", loss.recon},
            {"kl", loss.kl},
            {"recon_loss", loss.recon_loss == ReconLoss::mse ? "mse" : "bernoulli_nll"}}}};
}

GenConViTConfig GenConViTConfig::from_json(const nlohmann::json& j) {
  try {
    GenConViTConfig c;
    c.preset = parse_scale_preset(j.at("preset").get<std::string>());
    const auto& a = j.at("ae");
    c.ae.input_size = a.at("input_size");
    c.ae.input_channels = a.at("input_channels");
    c.ae.encoder_channels = a.at("encoder_channels").get<std::vector<std::size_t>>();
    c.ae.kernel = a.at("kernel");
    const auto& v = j.at("vae");
    c.vae.input_size = v.at("input_size");
    c.vae.input_channels = v.at("input_channels");
    c.vae.encoder_channels = v.at("encoder_channels").get<std::vector<std::size_t>>();
    c.vae.kernel = v.at("kernel");
    c.vae.latent_dim = v.at("latent_dim");
    c.vae.recon_size = v.at("recon_size");
    c.vae.leaky_slope = v.at("leaky_slope");
    const auto& h = j.at("hybrid");
    c.hybrid.convnext = backbone_from_json(h.at("convnext"));
    c.hybrid.swin = backbone_from_json(h.at("swin"));
    c.hybrid.embed_dim = h.at("embed_dim");
    c.hybrid.num_features = h.at("num_features");
    const auto& l = j.at("loss");
    c.loss.ce = l.at("ce");
    c.loss.recon = l.at("recon");
    c.loss.kl = l.at("kl");
    c.loss.recon_loss =
        l.at("recon_loss").get<std::string>() == "mse" ? ReconLoss::mse : ReconLoss::bernoulli_nll;
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("genconvit config: ") + e.what());
  }
}

AutoEncoder::AutoEncoder(const AEConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  std::size_t in = cfg_.input_channels;
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t out = cfg_.encoder_channels[i];
    enc_.push_back(std::make_unique<nn::Conv2d>(
        in, out, nn::Conv2dOptions{.kernel = cfg_.kernel, .stride = 2, .padding = cfg_.kernel / 2},
        rng));
    register_module("encoder" + std::to_string(i), *enc_.back());
    in = out;
  }
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t out = i + 1 < 5 ? cfg_.encoder_channels[3 - i] : cfg_.input_channels;
    dec_.push_back(std::make_unique<nn::ConvTranspose2d>(in, out, 2, 2, 0, rng));
    register_module("decoder" + std::to_string(i), *dec_.back());
    in = out;
  }
}

Var AutoEncoder::encode(const Var& images) const {
  require_image_batch(images, cfg_.input_channels, cfg_.input_size, "ae_encode");
  Var h = images;
  for (const auto& conv : enc_) h = nn::relu(conv->forward(h));
  return h;
}

Var AutoEncoder::decode(const Var& latent) const {
  const Shape expect = cfg_.latent_shape();
  const Shape& s = latent.shape();
  if (s.size() != 4 || s[1] != expect[0] || s[2] != expect[1] || s[3] != expect[2]) {
    throw ShapeError("ae_decode: latent " + to_string(s) + " does not match " +
                     to_string(expect));
  }
  Var h = latent;
  for (std::size_t i = 0; i < dec_.size(); ++i) {
    h = dec_[i]->forward(h);
    h = i + 1 < dec_.size() ? nn::relu(h) : nn::sigmoid(h);
  }
  return h;
}

VariationalAutoEncoder::VariationalAutoEncoder(const VAEConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  std::size_t in = cfg_.input_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t out = cfg_.encoder_channels[i];
    enc_.push_back(std::make_unique<nn::Conv2d>(
        in, out, nn::Conv2dOptions{.kernel = cfg_.kernel, .stride = 2, .padding = cfg_.kernel / 2},
        rng));
    bn_.push_back(std::make_unique<nn::BatchNorm2d>(out));
    register_module("encoder" + std::to_string(i), *enc_.back());
    register_module("encoder" + std::to_string(i) + "_bn", *bn_.back());
    in = out;
  }
  mu_head_ = std::make_unique<nn::Conv2d>(in, in, nn::Conv2dOptions{.kernel = 1}, rng);
  logvar_head_ = std::make_unique<nn::Conv2d>(in, in, nn::Conv2dOptions{.kernel = 1}, rng);
  register_module("mu", *mu_head_);
  register_module("logvar", *logvar_head_);

  std::vector<std::size_t> rev(cfg_.encoder_channels.rbegin(), cfg_.encoder_channels.rend());
  for (std::size_t i = 0; i < cfg_.decoder_stages(); ++i) {
    const std::size_t out = rev[std::min(i + 1, rev.size() - 1)];
    dec_.push_back(std::make_unique<nn::ConvTranspose2d>(in, out, 2, 2, 0, rng));
    register_module("decoder" + std::to_string(i), *dec_.back());
    in = out;
  }
  out_ = std::make_unique<nn::Conv2d>(
      in, cfg_.input_channels, nn::Conv2dOptions{.kernel = 3, .stride = 1, .padding = 1}, rng);
  register_module("decoder_out", *out_);
}

Posterior VariationalAutoEncoder::encode(const Var& images) {
  require_image_batch(images, cfg_.input_channels, cfg_.input_size, "vae_encode");
  Var h = images;
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    h = nn::leaky_relu(bn_[i]->forward(enc_[i]->forward(h)), cfg_.leaky_slope);
  }
  const std::size_t n = images.dim(0);
  return {nn::reshape(mu_head_->forward(h), {n, cfg_.latent_dim}),
          nn::reshape(logvar_head_->forward(h), {n, cfg_.latent_dim})};
}

Var VariationalAutoEncoder::decode(const Var& z) const {
  if (z.shape().size() != 2 || z.dim(1) != cfg_.latent_dim) {
    throw ShapeError("vae_decode: z " + to_string(z.shape()) + " does not have length " +
                     std::to_string(cfg_.latent_dim));
  }
  const std::size_t side = cfg_.latent_side();
  Var h = nn::reshape(z, {z.dim(0), cfg_.encoder_channels.back(), side, side});
  for (const auto& d : dec_) h = nn::relu(d->forward(h));
  return nn::sigmoid(out_->forward(h));
}

NetworkA::NetworkA(const GenConViTConfig& cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)),
      rng_(seed),
      ae_(cfg.ae, rng_),
      backbone_(cfg.hybrid, rng_),
      fc1_(2 * cfg.hybrid.num_features, std::max<std::size_t>(1, cfg.hybrid.num_features / 2),
           rng_),
      fc2_(std::max<std::size_t>(1, cfg.hybrid.num_features / 2), 2, rng_) {
  register_module("ae", ae_);
  register_module("backbone", backbone_);
  register_module("fc", fc1_);
  register_module("fc2", fc2_);
}

DetectorOutput NetworkA::forward(const Var& images) { return forward(images, false); }

DetectorOutput NetworkA::forward(const Var& images, bool zero_reconstruction) {
  DetectorOutput out;
  out.reconstruction = ae_.decode(ae_.encode(images));
  Var recon = zero_reconstruction ? Var(Tensor(out.reconstruction.shape())) : out.reconstruction;
  Var features = nn::concat({backbone_.forward(recon), backbone_.forward(images)}, 1);
  out.logits = head(fc1_, fc2_, features, true);
  return out;
}

NetworkLoss NetworkA::loss(const DetectorOutput& output, std::span<const int> labels,
                           const Tensor& images) const {
  return network_losses(output, labels, images, cfg_.loss, false, 0);
}

nlohmann::json NetworkA::config() const { return {{"genconvit", cfg_.to_json()}}; }

NetworkB::NetworkB(const GenConViTConfig& cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)),
      noise_rng_(seed ^ 0x9e3779b97f4a7c15ULL),
      vae_(cfg.vae, noise_rng_),
      backbone_(cfg.hybrid, noise_rng_),
      fc1_(2 * cfg.hybrid.num_features, std::max<std::size_t>(1, cfg.hybrid.num_features / 2),
           noise_rng_),
      fc2_(std::max<std::size_t>(1, cfg.hybrid.num_features / 2), 2, noise_rng_) {
  register_module("vae", vae_);
  register_module("backbone", backbone_);
  register_module("fc", fc1_);
  register_module("fc2", fc2_);
}

DetectorOutput NetworkB::forward(const Var& images) {
  Tensor noise({images.dim(0), cfg_.vae.latent_dim});
  if (training()) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : noise.values()) v = normal(noise_rng_);
  }
  return forward(images, noise);
}

DetectorOutput NetworkB::forward(const Var& images, const Tensor& noise) {
  DetectorOutput out;
  Posterior post = vae_.encode(images);
  out.latent_mu = post.mu;
  out.latent_logvar = post.logvar;
  Var z = nn::reparameterize(post.mu, post.logvar, noise);
  out.reconstruction = vae_.decode(z);
  Var features =
      nn::concat({backbone_.forward(out.reconstruction), backbone_.forward(images)}, 1);
  out.logits = head(fc1_, fc2_, features, false);
  return out;
}

NetworkLoss NetworkB::loss(const DetectorOutput& output, std::span<const int> labels,
                           const Tensor& images) const {
  return network_losses(output, labels, images, cfg_.loss, true, cfg_.vae.recon_size);
}

nlohmann::json NetworkB::config() const { return {{"genconvit", cfg_.to_json()}}; }

CombineMode parse_combine_mode(const std::string& name) {
  if (name == "avg") return CombineMode::avg;
  if (name == "max") return CombineMode::max;
  if (name == "a_only") return CombineMode::a_only;
  if (name == "b_only") return CombineMode::b_only;
  throw ConfigError("unknown combine mode '" + name + "'");
}

double combine_scores(double p_a, double p_b, CombineMode mode) {
  switch (mode) {
    case CombineMode::avg:
      return 0.5 * (p_a + p_b);
    case CombineMode::max:
      return std::max(p_a, p_b);
    case CombineMode::a_only:
      return p_a;
    case CombineMode::b_only:
      return p_b;
  }
  return p_a;
}

std::vector<double> combined_predict(const DetectorOutput& out_a, const DetectorOutput& out_b,
                                     CombineMode mode) {
  const auto pa = fake_probabilities(out_a.logits.value());
  const auto pb = fake_probabilities(out_b.logits.value());
  if (pa.size() != pb.size()) throw ShapeError("combined_predict: batch sizes differ");
  std::vector<double> out(pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) out[i] = combine_scores(pa[i], pb[i], mode);
  return out;
}

NetworkLoss network_losses(const DetectorOutput& output, std::span<const int> labels,
                           const Tensor& target_images, const LossWeights& weights,
                           bool with_reconstruction, std::size_t recon_size) {
  NetworkLoss loss;
  Var ce = nn::cross_entropy_with_logits(output.logits, labels);
  loss.breakdown.components["ce"] = ce.value().item();
  loss.total = nn::scale(ce, weights.ce);
  if (with_reconstruction) {
    if (!output.has_reconstruction()) {
      throw ConfigError("network loss needs a reconstruction but the output has none");
    }
    const Tensor target = data::resize_bilinear(target_images, recon_size);
    Var recon;
    if (weights.recon_loss == ReconLoss::mse) {
      recon = nn::mse(output.reconstruction, target);
      loss.breakdown.components["mse"] = recon.value().item();
    } else {
      // Bernoulli NLL through the sigmoid output: -mean[t log r + (1-t) log(1-r)]
      const Tensor& r = output.reconstruction.value();
      const double value = nn::bernoulli_nll_loss(target, r).value;
      recon = nn::detail::make_result(
          Tensor::scalar(value), {output.reconstruction}, [target](nn::Node& self) {
            Tensor& g = self.parents[0]->grad_buffer();
            const Tensor grad = nn::cross_entropy_loss_grad(target, self.parents[0]->value);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * grad[i];
          });
      loss.breakdown.components["nll"] = value;
    }
    loss.total = nn::add(loss.total, nn::scale(recon, weights.recon));
    if (output.latent_mu.defined()) {
      Var kl = nn::kl_divergence(output.latent_mu, output.latent_logvar);
      loss.breakdown.components["kl"] = kl.value().item();
      if (weights.kl > 0.0) loss.total = nn::add(loss.total, nn::scale(kl, weights.kl));
    }
  }
  loss.breakdown.value = loss.total.value().item();
  return loss;
}

}  // namespace dfbench::model

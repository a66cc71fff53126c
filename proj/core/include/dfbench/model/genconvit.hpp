#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dfbench/model/backbone.hpp"
#include "dfbench/model/detector.hpp"

namespace dfbench::model {

// Autoencoder of Network A: five stride-2 convolutions (ReLU) down to the
// latent map, five stride-2 transposed convolutions back up, sigmoid output.
struct AEConfig {
  std::size_t input_size = 224;
  std::size_t input_channels = 3;
  std::vector<std::size_t> encoder_channels{16, 32, 64, 128, 256};
  std::size_t kernel = 3;

  void validate() const;
  std::size_t latent_side() const;
  Shape latent_shape() const;  // (C, side, side)
};

// Variational autoencoder of Network B: four stride-2 convolutions with batch
// norm and LeakyReLU, 1x1 heads for mu and logvar, decoder up to recon_size.
struct VAEConfig {
  std::size_t input_size = 224;
  std::size_t input_channels = 3;
  std::vector<std::size_t> encoder_channels{16, 32, 64, 64};
  std::size_t kernel = 3;
  std::size_t latent_dim = 12544;
  std::size_t recon_size = 112;
  double leaky_slope = 0.2;

  void validate() const;
  std::size_t latent_side() const;
  std::size_t flattened_dim() const;
  std::size_t decoder_stages() const;
};

enum class ReconLoss { mse, bernoulli_nll };

struct LossWeights {
  double ce = 1.0;
  double recon = 1.0;  // Network B only
  double kl = 0.0;     // Network B only; the KL component is always reported
  ReconLoss recon_loss = ReconLoss::mse;
};

struct GenConViTConfig {
  ScalePreset preset = ScalePreset::paper_tiny;
  AEConfig ae;
  VAEConfig vae;
  HybridConfig hybrid;
  LossWeights loss;

  // 224x224 input, AE latent 256x7x7, VAE latent 12544, 112x112
  // reconstruction, 768-wide token embedding, swin window 7.
  static GenConViTConfig paper_tiny();
  // 64x64 input, embed width 64, window 4, one block per stage.
  static GenConViTConfig desk();
  static GenConViTConfig for_preset(ScalePreset preset);

  void validate() const;
  nlohmann::json to_json() const;
  static GenConViTConfig from_json(const nlohmann::json& j);
};

class AutoEncoder : public nn::Module {
 public:
  AutoEncoder(const AEConfig& cfg, nn::Rng& rng);
  nn::Var encode(const nn::Var& images) const;
  nn::Var decode(const nn::Var& latent) const;
  const AEConfig& config() const { return cfg_; }

 private:
  AEConfig cfg_;
  std::vector<std::unique_ptr<nn::Conv2d>> enc_;
  std::vector<std::unique_ptr<nn::ConvTranspose2d>> dec_;
};

struct Posterior {
  nn::Var mu;      // [N, latent_dim]
  nn::Var logvar;  // [N, latent_dim]
};

class VariationalAutoEncoder : public nn::Module {
 public:
  VariationalAutoEncoder(const VAEConfig& cfg, nn::Rng& rng);
  Posterior encode(const nn::Var& images);
  // Deterministic mean decoder: [N, latent_dim] -> [N, 3, recon, recon].
  nn::Var decode(const nn::Var& z) const;
  const VAEConfig& config() const { return cfg_; }

 private:
  VAEConfig cfg_;
  std::vector<std::unique_ptr<nn::Conv2d>> enc_;
  std::vector<std::unique_ptr<nn::BatchNorm2d>> bn_;
  std::unique_ptr<nn::Conv2d> mu_head_, logvar_head_;
  std::vector<std::unique_ptr<nn::ConvTranspose2d>> dec_;
  std::unique_ptr<nn::Conv2d> out_;
};

// Network A: AE reconstruction; the hybrid backbone sees both the
// reconstruction and the original; GELU MLP head on the concatenation.
class NetworkA : public Detector {
 public:
  NetworkA(const GenConViTConfig& cfg, std::uint64_t seed);

  std::string name() const override { return "genconvit_ae"; }
  std::size_t input_size() const override { return cfg_.ae.input_size; }
  DetectorOutput forward(const nn::Var& images) override;
  // zero_reconstruction replaces the reconstruction with zeros before the
  // backbone (ablation of the AE branch).
  DetectorOutput forward(const nn::Var& images, bool zero_reconstruction);
  NetworkLoss loss(const DetectorOutput& output, std::span<const int> labels,
                   const Tensor& images) const override;
  nlohmann::json config() const override;

  AutoEncoder& autoencoder() { return ae_; }
  HybridBackbone& backbone() { return backbone_; }
  const GenConViTConfig& genconvit_config() const { return cfg_; }

 private:
  GenConViTConfig cfg_;
  nn::Rng rng_;
  AutoEncoder ae_;
  HybridBackbone backbone_;
  nn::Linear fc1_, fc2_;
};

// Network B: VAE encode -> reparameterize -> decode; the hybrid backbone sees
// the reconstruction and the original; ReLU MLP head on the concatenation.
// In training mode noise is drawn from the network's own seeded generator; in
// eval mode it is zero.
class NetworkB : public Detector {
 public:
  NetworkB(const GenConViTConfig& cfg, std::uint64_t seed);

  std::string name() const override { return "genconvit_vae"; }
  std::size_t input_size() const override { return cfg_.vae.input_size; }
  DetectorOutput forward(const nn::Var& images) override;
  DetectorOutput forward(const nn::Var& images, const Tensor& noise);
  // CE + recon_weight * MSE(reconstruction, input downsampled to recon_size)
  // + kl_weight * KL.
  NetworkLoss loss(const DetectorOutput& output, std::span<const int> labels,
                   const Tensor& images) const override;
  nlohmann::json config() const override;

  VariationalAutoEncoder& vae() { return vae_; }
  HybridBackbone& backbone() { return backbone_; }
  const GenConViTConfig& genconvit_config() const { return cfg_; }

 private:
  GenConViTConfig cfg_;
  nn::Rng noise_rng_;
  VariationalAutoEncoder vae_;
  HybridBackbone backbone_;
  nn::Linear fc1_, fc2_;
};

enum class CombineMode { avg, max, a_only, b_only };
CombineMode parse_combine_mode(const std::string& name);

double combine_scores(double p_a, double p_b, CombineMode mode);
// Fake probability per sample from the two networks' logits.
std::vector<double> combined_predict(const DetectorOutput& out_a, const DetectorOutput& out_b,
                                     CombineMode mode = CombineMode::avg);

// Composite loss with named components "ce", "mse"/"nll" and "kl".
// Throws ConfigError when a reconstruction is required but absent.
NetworkLoss network_losses(const DetectorOutput& output, std::span<const int> labels,
                           const Tensor& target_images, const LossWeights& weights,
                           bool with_reconstruction, std::size_t recon_size);

}  // namespace dfbench::model

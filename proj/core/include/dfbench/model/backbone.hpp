#pragma once

// ConvNeXt-like and Swin-like stand-ins used by the GenConViT hybrid head.
// They keep the interface shapes of the originals (patchify stem, depthwise
// 7x7 blocks, 1x1 token projection, windowed self-attention with shifted
// windows, patch merging) at configurable width and depth.

#include <memory>
#include <string>
#include <vector>

#include "dfbench/nn/layers.hpp"

namespace dfbench::model {

enum class ScalePreset { paper_tiny, desk };
enum class BackboneKind { convnext_like, swin_like };

std::string to_string(ScalePreset preset);
ScalePreset parse_scale_preset(const std::string& name);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::convnext_like;
  std::vector<std::size_t> depth{1};   // blocks per stage
  std::vector<std::size_t> width{96};  // channels per stage
  std::size_t window = 7;              // swin only
  std::size_t heads = 12;              // swin only; divides every width
  std::size_t patch = 4;               // convnext stem patch size
  ScalePreset scale_preset = ScalePreset::paper_tiny;

  void validate() const;
  // Spatial reduction factor from input to the last feature map.
  std::size_t reduction() const;
};

class ConvNeXtBlock : public nn::Module {
 public:
  ConvNeXtBlock(std::size_t channels, nn::Rng& rng);
  nn::Var forward(const nn::Var& x) const;

 private:
  nn::Conv2d dwconv_;
  nn::LayerNorm norm_;
  nn::Linear pw1_, pw2_;
};

// Patchify stem, then stages of ConvNeXt blocks separated by 2x downsampling.
// [N, 3, H, W] -> [N, width.back(), H / reduction, W / reduction].
class ConvNeXtLike : public nn::Module {
 public:
  ConvNeXtLike(const BackboneConfig& cfg, std::size_t in_channels, nn::Rng& rng);
  nn::Var forward(const nn::Var& x) const;
  const BackboneConfig& config() const { return cfg_; }

 private:
  BackboneConfig cfg_;
  std::unique_ptr<nn::Conv2d> stem_;
  std::unique_ptr<nn::LayerNorm> stem_norm_;
  std::vector<std::unique_ptr<nn::LayerNorm>> down_norms_;
  std::vector<std::unique_ptr<nn::Conv2d>> downs_;
  std::vector<std::unique_ptr<ConvNeXtBlock>> blocks_;
  std::vector<std::size_t> stage_of_block_;
};

// 1x1 convolution to embed_dim followed by flatten + transpose:
// [N, C, H, W] -> [N, H*W, embed_dim].
class HybridEmbed : public nn::Module {
 public:
  HybridEmbed(std::size_t in_channels, std::size_t embed_dim, nn::Rng& rng);
  nn::Var forward(const nn::Var& features) const;
  nn::Conv2d& projection() { return proj_; }

 private:
  nn::Conv2d proj_;
};

// Window-partitioned multi-head self-attention over an [N, H*W, C] token grid.
class WindowAttention : public nn::Module {
 public:
  WindowAttention(std::size_t dim, std::size_t heads, nn::Rng& rng);
  // windows: [B', T, C]; mask: [nW, T, T] additive, or empty.
  nn::Var forward(const nn::Var& windows, std::size_t batch, const Tensor& mask);

  // Softmax weights of the last forward pass, [B' * heads, T, T].
  const Tensor& last_attention() const { return last_attention_; }

 private:
  std::size_t dim_, heads_;
  nn::Linear qkv_, proj_;
  Tensor last_attention_;
};

class SwinBlock : public nn::Module {
 public:
  SwinBlock(std::size_t dim, std::size_t heads, std::size_t window, std::size_t shift,
            nn::Rng& rng);
  nn::Var forward(const nn::Var& tokens, std::size_t height, std::size_t width);
  const WindowAttention& attention() const { return attn_; }

 private:
  std::size_t dim_, window_, shift_;
  nn::LayerNorm norm1_, norm2_;
  WindowAttention attn_;
  nn::Linear fc1_, fc2_;
};

// Additive mask for shifted windows: 0 within a region, -100 across regions.
Tensor shifted_window_mask(std::size_t height, std::size_t width, std::size_t window,
                           std::size_t shift);

// Stages of Swin blocks (alternating regular/shifted windows) with patch
// merging in between; returns the layer-normed mean token, [N, width.back()].
class SwinLike : public nn::Module {
 public:
  SwinLike(const BackboneConfig& cfg, std::size_t in_dim, nn::Rng& rng);
  nn::Var forward(const nn::Var& tokens, std::size_t height, std::size_t width);
  const BackboneConfig& config() const { return cfg_; }
  const std::vector<std::unique_ptr<SwinBlock>>& blocks() const { return blocks_; }

 private:
  BackboneConfig cfg_;
  std::vector<std::unique_ptr<SwinBlock>> blocks_;
  std::vector<std::size_t> stage_of_block_;
  std::vector<std::unique_ptr<nn::LayerNorm>> merge_norms_;
  std::vector<std::unique_ptr<nn::Linear>> merges_;
  std::unique_ptr<nn::Linear> input_proj_;  // only when in_dim != width[0]
  std::unique_ptr<nn::LayerNorm> norm_;
};

struct HybridConfig {
  BackboneConfig convnext;
  BackboneConfig swin;
  std::size_t embed_dim = 768;
  std::size_t num_features = 1000;

  void validate() const;
  // Throws ShapeError unless an input of side `input_size` fits every stage.
  void check_input(std::size_t input_size) const;
};

// ConvNeXt-like features -> HybridEmbed -> Swin-like -> linear head.
// [N, 3, S, S] -> [N, num_features].
class HybridBackbone : public nn::Module {
 public:
  HybridBackbone(const HybridConfig& cfg, nn::Rng& rng);
  nn::Var forward(const nn::Var& images);

  const HybridConfig& config() const { return cfg_; }
  ConvNeXtLike& convnext() { return convnext_; }
  HybridEmbed& embed() { return embed_; }
  SwinLike& swin() { return swin_; }

 private:
  HybridConfig cfg_;
  ConvNeXtLike convnext_;
  HybridEmbed embed_;
  SwinLike swin_;
  nn::Linear head_;
};

}  // namespace dfbench::model

#include "dfbench/model/backbone.hpp"

#include <cmath>

#include "dfbench/errors.hpp"
#include "dfbench/nn/ops.hpp"

namespace dfbench::model {

using dfbench::to_string;

using nn::Var;

std::string to_string(ScalePreset preset) {
  return preset == ScalePreset::desk ? "desk" : "paper_tiny";
}

ScalePreset parse_scale_preset(const std::string& name) {
  if (name == "desk") return ScalePreset::desk;
  if (name == "paper_tiny") return ScalePreset::paper_tiny;
  throw ConfigError("unknown scale preset '" + name + "' (expected desk or paper_tiny)");
}

void BackboneConfig::validate() const {
  if (depth.empty() || depth.size() != width.size()) {
    throw ConfigError("backbone: depth and width need one entry per stage");
  }
  for (auto w : width) {
    if (w == 0) throw ConfigError("backbone: zero width");
  }
  if (kind == BackboneKind::swin_like) {
    if (window == 0 || heads == 0) throw ConfigError("swin_like: window and heads must be >= 1");
    for (auto w : width) {
      if (w % heads != 0) throw ConfigError("swin_like: heads must divide every stage width");
    }
  } else if (patch == 0) {
    throw ConfigError("convnext_like: patch must be >= 1");
  }
}

std::size_t BackboneConfig::reduction() const {
  const std::size_t merges = std::size_t{1} << (depth.size() - 1);
  return kind == BackboneKind::convnext_like ? patch * merges : merges;
}

namespace {

// [N, C, H, W] <-> [N, H, W, C]
Var to_channels_last(const Var& x) { return nn::permute(x, {0, 2, 3, 1}); }
Var to_channels_first(const Var& x) { return nn::permute(x, {0, 3, 1, 2}); }

}  // namespace

ConvNeXtBlock::ConvNeXtBlock(std::size_t channels, nn::Rng& rng)
    : dwconv_(channels, channels, {.kernel = 7, .stride = 1, .padding = 3, .groups = channels},
              rng),
      norm_(channels),
      pw1_(channels, 4 * channels, rng),
      pw2_(4 * channels, channels, rng) {
  register_module("dwconv", dwconv_);
  register_module("norm", norm_);
  register_module("pwconv1", pw1_);
  register_module("pwconv2", pw2_);
}

Var ConvNeXtBlock::forward(const Var& x) const {
  Var h = to_channels_last(dwconv_.forward(x));
  h = pw2_.forward(nn::gelu(pw1_.forward(norm_.forward(h))));
  return nn::add(x, to_channels_first(h));
}

ConvNeXtLike::ConvNeXtLike(const BackboneConfig& cfg, std::size_t in_channels, nn::Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.kind != BackboneKind::convnext_like) throw ConfigError("ConvNeXtLike needs convnext_like");
  stem_ = std::make_unique<nn::Conv2d>(
      in_channels, cfg_.width[0], nn::Conv2dOptions{.kernel = cfg_.patch, .stride = cfg_.patch},
      rng);
  stem_norm_ = std::make_unique<nn::LayerNorm>(cfg_.width[0]);
  register_module("stem", *stem_);
  register_module("stem_norm", *stem_norm_);
  for (std::size_t s = 0; s < cfg_.depth.size(); ++s) {
    if (s > 0) {
      down_norms_.push_back(std::make_unique<nn::LayerNorm>(cfg_.width[s - 1]));
      downs_.push_back(std::make_unique<nn::Conv2d>(
          cfg_.width[s - 1], cfg_.width[s], nn::Conv2dOptions{.kernel = 2, .stride = 2}, rng));
      register_module("downsample" + std::to_string(s) + ".norm", *down_norms_.back());
      register_module("downsample" + std::to_string(s) + ".conv", *downs_.back());
    }
    for (std::size_t b = 0; b < cfg_.depth[s]; ++b) {
      blocks_.push_back(std::make_unique<ConvNeXtBlock>(cfg_.width[s], rng));
      stage_of_block_.push_back(s);
      register_module("stage" + std::to_string(s) + ".block" + std::to_string(b), *blocks_.back());
    }
  }
}

Var ConvNeXtLike::forward(const Var& x) const {
  if (x.shape().size() != 4 || x.dim(2) % cfg_.reduction() != 0 ||
      x.dim(3) % cfg_.reduction() != 0) {
    throw ShapeError("convnext_like: input " + to_string(x.shape()) +
                     " not divisible by reduction " + std::to_string(cfg_.reduction()));
  }
  Var h = stem_->forward(x);
  h = to_channels_first(stem_norm_->forward(to_channels_last(h)));
  std::size_t stage = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (stage_of_block_[i] != stage) {
      stage = stage_of_block_[i];
      const auto d = stage - 1;
      h = to_channels_first(down_norms_[d]->forward(to_channels_last(h)));
      h = downs_[d]->forward(h);
    }
    h = blocks_[i]->forward(h);
  }
  return h;
}

HybridEmbed::HybridEmbed(std::size_t in_channels, std::size_t embed_dim, nn::Rng& rng)
    : proj_(in_channels, embed_dim, {.kernel = 1}, rng) {
  register_module("proj", proj_);
}

Var HybridEmbed::forward(const Var& features) const {
  if (features.shape().size() != 4) throw ShapeError("hybrid_embed: expected [N,C,H,W]");
  Var p = proj_.forward(features);  // [N, E, H, W]
  const std::size_t n = p.dim(0), e = p.dim(1), hw = p.dim(2) * p.dim(3);
  return nn::permute(nn::reshape(p, {n, e, hw}), {0, 2, 1});
}

WindowAttention::WindowAttention(std::size_t dim, std::size_t heads, nn::Rng& rng)
    : dim_(dim), heads_(heads), qkv_(dim, 3 * dim, rng), proj_(dim, dim, rng) {
  if (heads == 0 || dim % heads != 0) throw ConfigError("WindowAttention: heads must divide dim");
  register_module("qkv", qkv_);
  register_module("proj", proj_);
}

Var WindowAttention::forward(const Var& windows, std::size_t batch, const Tensor& mask) {
  const std::size_t bw = windows.dim(0), t = windows.dim(1);
  const std::size_t hd = dim_ / heads_;
  Var qkv = nn::reshape(qkv_.forward(windows), {bw, t, 3, heads_, hd});
  qkv = nn::permute(qkv, {2, 0, 3, 1, 4});  // [3, B', h, T, d]
  auto part = [&](std::size_t i) { return nn::reshape(nn::select(qkv, i), {bw * heads_, t, hd}); };
  Var q = part(0), k = part(1), v = part(2);

  Var scores = nn::scale(nn::bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(hd)));
  if (!mask.empty()) {
    const std::size_t nw = mask.dim(0);
    scores = nn::reshape(scores, {batch, nw, heads_, t, t});
    scores = nn::add_constant(scores, mask.reshaped({nw, 1, t, t}));
    scores = nn::reshape(scores, {bw * heads_, t, t});
  }
  Var attn = nn::softmax(scores);
  last_attention_ = attn.value();
  Var out = nn::reshape(nn::bmm(attn, v), {bw, heads_, t, hd});
  out = nn::reshape(nn::permute(out, {0, 2, 1, 3}), {bw, t, dim_});
  return proj_.forward(out);
}

Tensor shifted_window_mask(std::size_t height, std::size_t width, std::size_t window,
                           std::size_t shift) {
  // Label the regions created by the cyclic shift, then compare labels within
  // each window.
  auto region = [&](std::size_t pos, std::size_t side) -> int {
    if (pos < side - window) return 0;
    if (pos < side - shift) return 1;
    return 2;
  };
  const std::size_t wy = height / window, wx = width / window, t = window * window;
  Tensor mask({wy * wx, t, t});
  std::vector<int> labels(t);
  for (std::size_t by = 0; by < wy; ++by) {
    for (std::size_t bx = 0; bx < wx; ++bx) {
      for (std::size_t i = 0; i < window; ++i) {
        for (std::size_t j = 0; j < window; ++j) {
          labels[i * window + j] =
              region(by * window + i, height) * 3 + region(bx * window + j, width);
        }
      }
      double* m = mask.data() + (by * wx + bx) * t * t;
      for (std::size_t a = 0; a < t; ++a) {
        for (std::size_t b = 0; b < t; ++b) m[a * t + b] = labels[a] == labels[b] ? 0.0 : -100.0;
      }
    }
  }
  return mask;
}

SwinBlock::SwinBlock(std::size_t dim, std::size_t heads, std::size_t window, std::size_t shift,
                     nn::Rng& rng)
    : dim_(dim),
      window_(window),
      shift_(shift),
      norm1_(dim, 1e-5),
      norm2_(dim, 1e-5),
      attn_(dim, heads, rng),
      fc1_(dim, 4 * dim, rng),
      fc2_(4 * dim, dim, rng) {
  register_module("norm1", norm1_);
  register_module("attn", attn_);
  register_module("norm2", norm2_);
  register_module("mlp.fc1", fc1_);
  register_module("mlp.fc2", fc2_);
}

Var SwinBlock::forward(const Var& tokens, std::size_t height, std::size_t width) {
  const std::size_t n = tokens.dim(0), w = window_;
  if (height % w != 0 || width % w != 0) {
    throw ShapeError("swin_like: window " + std::to_string(w) + " does not divide feature map " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  // A window covering the whole map makes shifting pointless.
  const std::size_t shift = (height == w && width == w) ? 0 : shift_;
  const long s = static_cast<long>(shift);

  Var h = nn::reshape(norm1_.forward(tokens), {n, height, width, dim_});
  if (shift) h = nn::roll(h, {0, -s, -s, 0});
  const std::size_t wy = height / w, wx = width / w;
  h = nn::reshape(h, {n, wy, w, wx, w, dim_});
  h = nn::reshape(nn::permute(h, {0, 1, 3, 2, 4, 5}), {n * wy * wx, w * w, dim_});

  const Tensor mask = shift ? shifted_window_mask(height, width, w, shift) : Tensor();
  h = attn_.forward(h, n, mask);

  h = nn::reshape(h, {n, wy, wx, w, w, dim_});
  h = nn::reshape(nn::permute(h, {0, 1, 3, 2, 4, 5}), {n, height, width, dim_});
  if (shift) h = nn::roll(h, {0, s, s, 0});
  Var x = nn::add(tokens, nn::reshape(h, {n, height * width, dim_}));
  return nn::add(x, fc2_.forward(nn::gelu(fc1_.forward(norm2_.forward(x)))));
}

SwinLike::SwinLike(const BackboneConfig& cfg, std::size_t in_dim, nn::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.kind != BackboneKind::swin_like) throw ConfigError("SwinLike needs swin_like");
  if (in_dim != cfg_.width[0]) {
    input_proj_ = std::make_unique<nn::Linear>(in_dim, cfg_.width[0], rng);
    register_module("input_proj", *input_proj_);
  }
  for (std::size_t s = 0; s < cfg_.depth.size(); ++s) {
    if (s > 0) {
      merge_norms_.push_back(std::make_unique<nn::LayerNorm>(4 * cfg_.width[s - 1], 1e-5));
      merges_.push_back(
          std::make_unique<nn::Linear>(4 * cfg_.width[s - 1], cfg_.width[s], rng, false));
      register_module("merge" + std::to_string(s) + ".norm", *merge_norms_.back());
      register_module("merge" + std::to_string(s) + ".reduction", *merges_.back());
    }
    for (std::size_t b = 0; b < cfg_.depth[s]; ++b) {
      const std::size_t shift = (b % 2 == 1) ? cfg_.window / 2 : 0;
      blocks_.push_back(
          std::make_unique<SwinBlock>(cfg_.width[s], cfg_.heads, cfg_.window, shift, rng));
      stage_of_block_.push_back(s);
      register_module("stage" + std::to_string(s) + ".block" + std::to_string(b), *blocks_.back());
    }
  }
  norm_ = std::make_unique<nn::LayerNorm>(cfg_.width.back(), 1e-5);
  register_module("norm", *norm_);
}

Var SwinLike::forward(const Var& tokens, std::size_t height, std::size_t width) {
  if (tokens.shape().size() != 3 || tokens.dim(1) != height * width) {
    throw ShapeError("swin_like: tokens " + to_string(tokens.shape()) + " do not match grid " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  const std::size_t n = tokens.dim(0);
  Var x = input_proj_ ? input_proj_->forward(tokens) : tokens;
  std::size_t stage = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (stage_of_block_[i] != stage) {
      stage = stage_of_block_[i];
      const std::size_t c = cfg_.width[stage - 1];
      if (height % 2 || width % 2) throw ShapeError("swin_like: patch merging needs even sides");
      // Gather each 2x2 neighbourhood into one token of width 4C.
      Var g = nn::reshape(x, {n, height / 2, 2, width / 2, 2, c});
      g = nn::permute(g, {0, 1, 3, 4, 2, 5});
      height /= 2;
      width /= 2;
      g = nn::reshape(g, {n, height * width, 4 * c});
      x = merges_[stage - 1]->forward(merge_norms_[stage - 1]->forward(g));
    }
    x = blocks_[i]->forward(x, height, width);
  }
  return norm_->forward(nn::mean_axis(x, 1));
}

void HybridConfig::validate() const {
  convnext.validate();
  swin.validate();
  if (convnext.kind != BackboneKind::convnext_like || swin.kind != BackboneKind::swin_like) {
    throw ConfigError("hybrid backbone needs a convnext_like and a swin_like config");
  }
  if (embed_dim == 0 || num_features == 0) throw ConfigError("hybrid backbone: zero width");
}

void HybridConfig::check_input(std::size_t input_size) const {
  const std::size_t r = convnext.reduction();
  if (input_size % r != 0) {
    throw ShapeError("hybrid backbone: input side " + std::to_string(input_size) +
                     " not divisible by convnext reduction " + std::to_string(r));
  }
  std::size_t side = input_size / r;
  for (std::size_t s = 0; s < swin.depth.size(); ++s) {
    if (s > 0) {
      if (side % 2) throw ShapeError("hybrid backbone: odd side before patch merging");
      side /= 2;
    }
    if (side % swin.window != 0) {
      throw ShapeError("hybrid backbone: swin window " + std::to_string(swin.window) +
                       " does not divide feature-map side " + std::to_string(side));
    }
  }
}

HybridBackbone::HybridBackbone(const HybridConfig& cfg, nn::Rng& rng)
    : cfg_((cfg.validate(), cfg)),
      convnext_(cfg.convnext, 3, rng),
      embed_(cfg.convnext.width.back(), cfg.embed_dim, rng),
      swin_(cfg.swin, cfg.embed_dim, rng),
      head_(cfg.swin.width.back(), cfg.num_features, rng) {
  register_module("convnext", convnext_);
  register_module("patch_embed", embed_);
  register_module("swin", swin_);
  register_module("head", head_);
}

Var HybridBackbone::forward(const Var& images) {
  cfg_.check_input(images.dim(2));
  Var f = convnext_.forward(images);
  const std::size_t h = f.dim(2), w = f.dim(3);
  return head_.forward(swin_.forward(embed_.forward(f), h, w));
}

}  // namespace dfbench::model

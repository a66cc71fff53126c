#include <Eigen/Core>
#include <limits>

#include "dfbench/errors.hpp"
#include "dfbench/nn/ops.hpp"

namespace dfbench::nn {

using detail::make_result;
using detail::wants_grad;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

struct Geometry {
  std::size_t channels, height, width;  // image side
  std::size_t kernel_h, kernel_w, stride, padding;
  std::size_t out_h, out_w;  // sliding-window grid

  std::size_t col_rows() const { return channels * kernel_h * kernel_w; }
  std::size_t col_cols() const { return out_h * out_w; }
};

// col[(c*kh + i)*kw + j, oy*ow + ox] = img[c, oy*s + i - p, ox*s + j - p]
void im2col(const double* img, const Geometry& g, double* col) {
  const long pad = static_cast<long>(g.padding);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        double* row = col + ((c * g.kernel_h + i) * g.kernel_w + j) * g.col_cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - pad;
          double* dst = row + oy * g.out_w;
          if (y < 0 || y >= static_cast<long>(g.height)) {
            std::fill_n(dst, g.out_w, 0.0);
            continue;
          }
          const double* src = img + (c * g.height + static_cast<std::size_t>(y)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long x = static_cast<long>(ox * g.stride + j) - pad;
            dst[ox] = (x < 0 || x >= static_cast<long>(g.width)) ? 0.0 : src[x];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-add columns back into the image.
void col2im(const double* col, const Geometry& g, double* img) {
  const long pad = static_cast<long>(g.padding);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        const double* row = col + ((c * g.kernel_h + i) * g.kernel_w + j) * g.col_cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - pad;
          if (y < 0 || y >= static_cast<long>(g.height)) continue;
          double* dst = img + (c * g.height + static_cast<std::size_t>(y)) * g.width;
          const double* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long x = static_cast<long>(ox * g.stride + j) - pad;
            if (x >= 0 && x < static_cast<long>(g.width)) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  if (in + 2 * p < k) throw ShapeError("convolution kernel larger than padded input");
  return (in + 2 * p - k) / s + 1;
}

void add_channel_bias(Tensor& out, const Tensor& bias, std::size_t n, std::size_t c,
                      std::size_t hw) {
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* p = out.data() + (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) p[i] += bias[ch];
    }
  }
}

void accumulate_channel_bias_grad(const Tensor& grad, Tensor& gbias, std::size_t n,
                                  std::size_t c, std::size_t hw) {
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* p = grad.data() + (b * c + ch) * hw;
      double s = 0.0;
      for (std::size_t i = 0; i < hw; ++i) s += p[i];
      gbias[ch] += s;
    }
  }
}

void require_nchw(const Var& x, const char* what) {
  if (x.shape().size() != 4) {
    throw ShapeError(std::string(what) + ": expected NCHW input, got " + to_string(x.shape()));
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride,
           std::size_t padding, std::size_t groups) {
  require_nchw(x, "conv2d");
  require_nchw(weight, "conv2d weight");
  if (stride == 0 || groups == 0) throw ConfigError("conv2d: stride and groups must be >= 1");
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (cin % groups != 0 || cout % groups != 0 || weight.dim(1) != cin / groups) {
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " incompatible with weight " +
                     to_string(weight.shape()) + " and groups=" + std::to_string(groups));
  }
  if (bias.defined() && bias.value().size() != cout) throw ShapeError("conv2d: bias size");

  const std::size_t cin_g = cin / groups, cout_g = cout / groups;
  Geometry geo{cin_g, h, w, kh, kw, stride, padding, conv_out(h, kh, stride, padding),
               conv_out(w, kw, stride, padding)};
  const std::size_t ohw = geo.col_cols();
  const std::size_t krows = geo.col_rows();

  Tensor out({n, cout, geo.out_h, geo.out_w});
  std::vector<double> col(krows * ohw);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t g = 0; g < groups; ++g) {
      im2col(x.value().data() + (b * cin + g * cin_g) * h * w, geo, col.data());
      MatMap(out.data() + (b * cout + g * cout_g) * ohw, cout_g, ohw).noalias() =
          ConstMatMap(weight.value().data() + g * cout_g * krows, cout_g, krows) *
          ConstMatMap(col.data(), krows, ohw);
    }
  }
  if (bias.defined()) add_channel_bias(out, bias.value(), n, cout, ohw);

  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [=](Node& self) {
    const bool gx = wants_grad(self, 0), gw = wants_grad(self, 1);
    const Tensor& xv = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    double* dx = gx ? self.parents[0]->grad_buffer().data() : nullptr;
    double* dw = gw ? self.parents[1]->grad_buffer().data() : nullptr;
    std::vector<double> col(krows * ohw), dcol(gx ? krows * ohw : 0);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t g = 0; g < groups; ++g) {
        ConstMatMap up(self.grad.data() + (b * cout + g * cout_g) * ohw, cout_g, ohw);
        if (gw) {
          im2col(xv.data() + (b * cin + g * cin_g) * h * w, geo, col.data());
          MatMap(dw + g * cout_g * krows, cout_g, krows).noalias() +=
              up * ConstMatMap(col.data(), krows, ohw).transpose();
        }
        if (gx) {
          MatMap(dcol.data(), krows, ohw).noalias() =
              ConstMatMap(wv.data() + g * cout_g * krows, cout_g, krows).transpose() * up;
          col2im(dcol.data(), geo, dx + (b * cin + g * cin_g) * h * w);
        }
      }
    }
    if (self.parents.size() > 2 && wants_grad(self, 2)) {
      accumulate_channel_bias_grad(self.grad, self.parents[2]->grad_buffer(), n, cout, ohw);
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride,
                     std::size_t padding) {
  require_nchw(x, "conv_transpose2d");
  require_nchw(weight, "conv_transpose2d weight");
  if (stride == 0) throw ConfigError("conv_transpose2d: stride must be >= 1");
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(0) != cin) {
    throw ShapeError("conv_transpose2d: input " + to_string(x.shape()) +
                     " incompatible with weight " + to_string(weight.shape()));
  }
  if (bias.defined() && bias.value().size() != cout) {
    throw ShapeError("conv_transpose2d: bias size");
  }
  if ((h - 1) * stride + kh < 2 * padding || (w - 1) * stride + kw < 2 * padding) {
    throw ShapeError("conv_transpose2d: padding too large");
  }
  const std::size_t oh = (h - 1) * stride + kh - 2 * padding;
  const std::size_t ow = (w - 1) * stride + kw - 2 * padding;
  // The output plays the image role and the input is the sliding-window grid.
  Geometry geo{cout, oh, ow, kh, kw, stride, padding, h, w};
  const std::size_t krows = geo.col_rows();
  const std::size_t hw = h * w;

  Tensor out({n, cout, oh, ow});
  std::vector<double> col(krows * hw);
  ConstMatMap wm(weight.value().data(), cin, krows);
  for (std::size_t b = 0; b < n; ++b) {
    MatMap(col.data(), krows, hw).noalias() =
        wm.transpose() * ConstMatMap(x.value().data() + b * cin * hw, cin, hw);
    col2im(col.data(), geo, out.data() + b * cout * oh * ow);
  }
  if (bias.defined()) add_channel_bias(out, bias.value(), n, cout, oh * ow);

  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [=](Node& self) {
    const bool gx = wants_grad(self, 0), gw = wants_grad(self, 1);
    const Tensor& xv = self.parents[0]->value;
    ConstMatMap wm(self.parents[1]->value.data(), cin, krows);
    std::vector<double> col(krows * hw);
    for (std::size_t b = 0; b < n; ++b) {
      im2col(self.grad.data() + b * cout * oh * ow, geo, col.data());
      ConstMatMap cm(col.data(), krows, hw);
      if (gx) {
        MatMap(self.parents[0]->grad_buffer().data() + b * cin * hw, cin, hw).noalias() +=
            wm * cm;
      }
      if (gw) {
        MatMap(self.parents[1]->grad_buffer().data(), cin, krows).noalias() +=
            ConstMatMap(xv.data() + b * cin * hw, cin, hw) * cm.transpose();
      }
    }
    if (self.parents.size() > 2 && wants_grad(self, 2)) {
      accumulate_channel_bias_grad(self.grad, self.parents[2]->grad_buffer(), n, cout, oh * ow);
    }
  });
}

Var max_pool2d(const Var& x, std::size_t kernel, std::size_t stride) {
  require_nchw(x, "max_pool2d");
  if (kernel == 0 || stride == 0) throw ConfigError("max_pool2d: kernel and stride must be >= 1");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = conv_out(h, kernel, stride, 0), ow = conv_out(w, kernel, stride, 0);
  Tensor out({n, c, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  const double* in = x.value().data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const double* src = in + plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < kernel; ++i) {
          for (std::size_t j = 0; j < kernel; ++j) {
            const std::size_t idx = (oy * stride + i) * w + ox * stride + j;
            if (src[idx] > best) {
              best = src[idx];
              best_i = idx;
            }
          }
        }
        const std::size_t o = (plane * oh + oy) * ow + ox;
        out[o] = best;
        argmax[o] = plane * h * w + best_i;
      }
    }
  }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
  });
}

}  // namespace dfbench::nn

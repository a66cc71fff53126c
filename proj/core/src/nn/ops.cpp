#include "dfbench/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "dfbench/errors.hpp"
#include "dfbench/nn/primitives.hpp"

namespace dfbench::nn {

using detail::make_result;
using detail::wants_grad;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

void require_rank(const Var& x, std::size_t rank, const char* what) {
  if (x.shape().size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(x.shape()));
  }
}

template <typename Forward, typename Derivative>
Var unary(const Var& x, Forward f, Derivative df) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(std::move(out), {x}, [df](Node& self) {
    const Tensor& in = self.parents[0]->value;
    Tensor& gin = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < in.size(); ++i) gin[i] += self.grad[i] * df(in[i], self.value[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants_grad(self, p)) continue;
      Tensor& g = self.parents[p]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (wants_grad(self, 0)) {
      Tensor& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(self, 1)) {
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (wants_grad(self, 0)) {
      Tensor& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants_grad(self, 1)) {
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= factor;
  return make_result(std::move(out), {a}, [factor](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Var add_constant(const Var& a, const Tensor& c) {
  const Shape& shape = a.shape();
  const Shape& cshape = c.shape();
  if (cshape.size() > shape.size()) throw ShapeError("add_constant: constant has higher rank");
  const std::size_t offset = shape.size() - cshape.size();
  for (std::size_t i = 0; i < cshape.size(); ++i) {
    if (cshape[i] != 1 && cshape[i] != shape[offset + i]) {
      throw ShapeError("add_constant: cannot broadcast " + to_string(cshape) + " to " +
                       to_string(shape));
    }
  }
  const auto cstrides = strides_of(cshape);
  Tensor out = a.value();
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t ci = 0;
    for (std::size_t d = 0; d < cshape.size(); ++d) {
      if (cshape[d] != 1) ci += idx[offset + d] * cstrides[d];
    }
    out[i] += c[ci];
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  return make_result(std::move(out), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  return make_result(Tensor::scalar(acc), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double up = self.grad[0];
    for (auto& v : g.values()) v += up;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var mean_axis(const Var& a, std::size_t axis) {
  const Shape& shape = a.shape();
  if (axis >= shape.size()) throw ShapeError("mean_axis: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];
  Shape out_shape = shape;
  out_shape.erase(out_shape.begin() + static_cast<long>(axis));
  if (out_shape.empty()) out_shape = {1};
  Tensor out(out_shape);
  const Tensor& in = a.value();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < n; ++k) {
      const double* src = in.data() + (o * n + k) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t j = 0; j < inner; ++j) dst[j] += src[j];
    }
  }
  for (auto& v : out.values()) v /= static_cast<double>(n);
  return make_result(std::move(out), {a}, [outer, inner, n](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t o = 0; o < outer; ++o) {
      const double* up = self.grad.data() + o * inner;
      for (std::size_t k = 0; k < n; ++k) {
        double* dst = g.data() + (o * n + k) * inner;
        for (std::size_t j = 0; j < inner; ++j) dst[j] += up[j] * inv;
      }
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_result(std::move(out), {a}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

namespace {

// dst[perm-index] = src; out shape is shape[perm[i]].
void permute_copy(const double* src, const Shape& shape, const std::vector<std::size_t>& perm,
                  double* dst, bool accumulate_into_src_layout) {
  const std::size_t rank = shape.size();
  const auto in_strides = strides_of(shape);
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = shape[perm[i]];
  std::vector<std::size_t> src_step(rank);
  for (std::size_t i = 0; i < rank; ++i) src_step[i] = in_strides[perm[i]];

  std::vector<std::size_t> idx(rank, 0);
  std::size_t src_off = 0;
  const std::size_t total = numel(shape);
  const std::size_t last = rank - 1;
  const std::size_t last_n = out_shape[last];
  const std::size_t last_step = src_step[last];
  for (std::size_t o = 0; o < total; o += last_n) {
    if (accumulate_into_src_layout) {
      // dst is laid out like src; src here is the permuted gradient
      for (std::size_t j = 0; j < last_n; ++j) dst[src_off + j * last_step] += src[o + j];
    } else {
      for (std::size_t j = 0; j < last_n; ++j) dst[o + j] = src[src_off + j * last_step];
    }
    for (std::size_t d = last; d-- > 0;) {
      src_off += src_step[d];
      if (++idx[d] < out_shape[d]) break;
      src_off -= src_step[d] * out_shape[d];
      idx[d] = 0;
    }
  }
}

}  // namespace

Var permute(const Var& a, const std::vector<std::size_t>& perm) {
  const Shape& shape = a.shape();
  if (perm.size() != shape.size()) throw ShapeError("permute: rank mismatch");
  std::vector<bool> seen(perm.size(), false);
  for (auto p : perm) {
    if (p >= perm.size() || seen[p]) throw ShapeError("permute: invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(shape.size());
  for (std::size_t i = 0; i < shape.size(); ++i) out_shape[i] = shape[perm[i]];
  Tensor out(out_shape);
  permute_copy(a.value().data(), shape, perm, out.data(), false);
  return make_result(std::move(out), {a}, [perm](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    permute_copy(self.grad.data(), self.parents[0]->value.shape(), perm, g.data(), true);
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  std::vector<std::size_t> chunk;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw ShapeError("concat: shape mismatch " + to_string(s) + " vs " + to_string(first));
      }
    }
    out_shape[axis] += s[axis];
    chunk.push_back(p.value().size() / outer);
  }
  Tensor out(out_shape);
  std::size_t row = 0;
  for (auto c : chunk) row += c;
  std::size_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const double* src = parts[p].value().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * chunk[p], chunk[p], out.data() + o * row + col);
    }
    col += chunk[p];
  }
  return make_result(std::move(out), parts, [outer, chunk, row](Node& self) {
    std::size_t col = 0;
    for (std::size_t p = 0; p < chunk.size(); ++p) {
      if (wants_grad(self, p)) {
        Tensor& g = self.parents[p]->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = self.grad.data() + o * row + col;
          double* dst = g.data() + o * chunk[p];
          for (std::size_t j = 0; j < chunk[p]; ++j) dst[j] += src[j];
        }
      }
      col += chunk[p];
    }
  });
}

Var select(const Var& a, std::size_t index) {
  const Shape& shape = a.shape();
  if (shape.empty() || index >= shape[0]) throw ShapeError("select: index out of range");
  Shape out_shape(shape.begin() + 1, shape.end());
  if (out_shape.empty()) out_shape = {1};
  const std::size_t chunk = numel(out_shape);
  Tensor out(out_shape);
  std::copy_n(a.value().data() + index * chunk, chunk, out.data());
  return make_result(std::move(out), {a}, [index, chunk](Node& self) {
    double* dst = self.parents[0]->grad_buffer().data() + index * chunk;
    for (std::size_t j = 0; j < chunk; ++j) dst[j] += self.grad[j];
  });
}

namespace {

void roll_copy(const Tensor& src, const std::vector<long>& shifts, Tensor& dst, bool accumulate) {
  const Shape& shape = src.shape();
  const auto strides = strides_of(shape);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) {
      const long n = static_cast<long>(shape[d]);
      const long j = ((static_cast<long>(idx[d]) + shifts[d]) % n + n) % n;
      off += static_cast<std::size_t>(j) * strides[d];
    }
    if (accumulate) {
      dst[off] += src[i];
    } else {
      dst[off] = src[i];
    }
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
}

}  // namespace

Var roll(const Var& a, const std::vector<long>& shifts) {
  if (shifts.size() != a.shape().size()) throw ShapeError("roll: one shift per axis required");
  Tensor out(a.shape());
  roll_copy(a.value(), shifts, out, false);
  return make_result(std::move(out), {a}, [shifts](Node& self) {
    std::vector<long> back(shifts.size());
    for (std::size_t i = 0; i < shifts.size(); ++i) back[i] = -shifts[i];
    roll_copy(self.grad, back, self.parents[0]->grad_buffer(), true);
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Tensor out({m, n});
  MatMap(out.data(), m, n).noalias() =
      ConstMatMap(a.value().data(), m, k) * ConstMatMap(b.value().data(), k, n);
  return make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    ConstMatMap g(self.grad.data(), m, n);
    if (wants_grad(self, 0)) {
      MatMap(self.parents[0]->grad_buffer().data(), m, k).noalias() +=
          g * ConstMatMap(self.parents[1]->value.data(), k, n).transpose();
    }
    if (wants_grad(self, 1)) {
      MatMap(self.parents[1]->grad_buffer().data(), k, n).noalias() +=
          ConstMatMap(self.parents[0]->value.data(), m, k).transpose() * g;
    }
  });
}

Var bmm(const Var& a, const Var& b, bool transpose_b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != batch || bk != k) {
    throw ShapeError("bmm: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Tensor out({batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    ConstMatMap am(a.value().data() + i * m * k, m, k);
    MatMap om(out.data() + i * m * n, m, n);
    if (transpose_b) {
      om.noalias() = am * ConstMatMap(b.value().data() + i * n * k, n, k).transpose();
    } else {
      om.noalias() = am * ConstMatMap(b.value().data() + i * k * n, k, n);
    }
  }
  return make_result(std::move(out), {a, b}, [batch, m, k, n, transpose_b](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    const bool ga = wants_grad(self, 0), gb = wants_grad(self, 1);
    double* da = ga ? self.parents[0]->grad_buffer().data() : nullptr;
    double* db = gb ? self.parents[1]->grad_buffer().data() : nullptr;
    for (std::size_t i = 0; i < batch; ++i) {
      ConstMatMap g(self.grad.data() + i * m * n, m, n);
      ConstMatMap am(av.data() + i * m * k, m, k);
      if (transpose_b) {
        ConstMatMap bm(bv.data() + i * n * k, n, k);
        if (ga) MatMap(da + i * m * k, m, k).noalias() += g * bm;
        if (gb) MatMap(db + i * n * k, n, k).noalias() += g.transpose() * am;
      } else {
        ConstMatMap bm(bv.data() + i * k * n, k, n);
        if (ga) MatMap(da + i * m * k, m, k).noalias() += g * bm.transpose();
        if (gb) MatMap(db + i * k * n, k, n).noalias() += am.transpose() * g;
      }
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(weight, 2, "linear weight");
  const Shape& shape = x.shape();
  const std::size_t out_f = weight.dim(0), in_f = weight.dim(1);
  if (shape.empty() || shape.back() != in_f) {
    throw ShapeError("linear: input " + to_string(shape) + " vs weight " +
                     to_string(weight.shape()));
  }
  if (bias.defined() && bias.value().size() != out_f) throw ShapeError("linear: bias size");
  const std::size_t rows = x.value().size() / in_f;
  Shape out_shape = shape;
  out_shape.back() = out_f;
  Tensor out(out_shape);
  MatMap om(out.data(), rows, out_f);
  om.noalias() = ConstMatMap(x.value().data(), rows, in_f) *
                 ConstMatMap(weight.value().data(), out_f, in_f).transpose();
  if (bias.defined()) {
    om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value().data(), out_f);
  }
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [rows, in_f, out_f](Node& self) {
    ConstMatMap g(self.grad.data(), rows, out_f);
    if (wants_grad(self, 0)) {
      MatMap(self.parents[0]->grad_buffer().data(), rows, in_f).noalias() +=
          g * ConstMatMap(self.parents[1]->value.data(), out_f, in_f);
    }
    if (wants_grad(self, 1)) {
      MatMap(self.parents[1]->grad_buffer().data(), out_f, in_f).noalias() +=
          g.transpose() * ConstMatMap(self.parents[0]->value.data(), rows, in_f);
    }
    if (self.parents.size() > 2 && wants_grad(self, 2)) {
      Eigen::Map<Eigen::RowVectorXd>(self.parents[2]->grad_buffer().data(), out_f) +=
          g.colwise().sum();
    }
  });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("leaky_relu slope must be in (0,1)");
  return unary(
      x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Var gelu(const Var& x) {
  return unary(
      x, [](double v) { return nn::gelu(v); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](double v) { return nn::sigmoid(v); }, [](double, double y) { return y * (1.0 - y); });
}

Var softmax(const Var& x) {
  const Shape& shape = x.shape();
  if (shape.empty()) throw ShapeError("softmax: scalar input");
  const std::size_t cols = shape.back();
  const std::size_t rows = x.value().size() / cols;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.value().data() + r * cols;
    double* o = out.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (o[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
  }
  return make_result(std::move(out), {x}, [rows, cols](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* up = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += y[c] * up[c];
      double* dst = g.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += y[c] * (up[c] - dot);
    }
  });
}

Var reparameterize(const Var& mu, const Var& logvar, const Tensor& noise) {
  require_same_shape(mu.value(), logvar.value(), "reparameterize");
  require_same_shape(mu.value(), noise, "reparameterize noise");
  Tensor out(mu.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mu.value()[i] + std::exp(0.5 * logvar.value()[i]) * noise[i];
  }
  return make_result(std::move(out), {mu, logvar}, [noise](Node& self) {
    if (wants_grad(self, 0)) {
      Tensor& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(self, 1)) {
      const Tensor& lv = self.parents[1]->value;
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * noise[i] * 0.5 * std::exp(0.5 * lv[i]);
      }
    }
  });
}

Var cross_entropy_with_logits(const Var& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy_with_logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) throw ShapeError("cross_entropy_with_logits: label count mismatch");
  Tensor probs({n, c});
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= c) {
      throw ConfigError("cross_entropy_with_logits: label out of range");
    }
    const double* in = logits.value().data() + r * c;
    double* p = probs.data() + r * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(in[j] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) p[j] = std::exp(in[j] - log_z);
    loss -= in[labels[r]] - log_z;
  }
  loss /= static_cast<double>(n);
  std::vector<int> owned(labels.begin(), labels.end());
  return make_result(Tensor::scalar(loss), {logits},
                     [probs = std::move(probs), owned = std::move(owned), n, c](Node& self) {
                       Tensor& g = self.parents[0]->grad_buffer();
                       const double up = self.grad[0] / static_cast<double>(n);
                       for (std::size_t r = 0; r < n; ++r) {
                         for (std::size_t j = 0; j < c; ++j) {
                           const double onehot = static_cast<int>(j) == owned[r] ? 1.0 : 0.0;
                           g[r * c + j] += up * (probs[r * c + j] - onehot);
                         }
                       }
                     });
}

Var mse(const Var& prediction, const Tensor& target) {
  require_same_shape(prediction.value(), target, "mse");
  const double value = mse_loss(target, prediction.value()).value;
  return make_result(Tensor::scalar(value), {prediction}, [target](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const Tensor& p = self.parents[0]->value;
    const double k = 2.0 * self.grad[0] / static_cast<double>(p.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * (p[i] - target[i]);
  });
}

Var kl_divergence(const Var& mu, const Var& logvar) {
  const double value = kl_diag_gaussian(mu.value(), logvar.value()).value;
  const double batch = mu.shape().size() >= 2 ? static_cast<double>(mu.dim(0)) : 1.0;
  return make_result(Tensor::scalar(value), {mu, logvar}, [batch](Node& self) {
    const double up = self.grad[0] / batch;
    if (wants_grad(self, 0)) {
      const Tensor& m = self.parents[0]->value;
      Tensor& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * m[i];
    }
    if (wants_grad(self, 1)) {
      const Tensor& lv = self.parents[1]->value;
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * 0.5 * (std::exp(lv[i]) - 1.0);
    }
  });
}

Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                 Tensor& running_var, bool training, double momentum, double eps) {
  require_rank(x, 4, "batch_norm2d");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.value().size() != c || beta.value().size() != c || running_mean.size() != c ||
      running_var.size() != c) {
    throw ShapeError("batch_norm2d: parameter size does not match channel count");
  }
  const std::size_t count = n * hw;
  std::vector<double> mean(c), inv_std(c);
  const Tensor& in = x.value();
  if (training) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = in.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = in.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) v += (p[i] - m) * (p[i] - m);
      }
      const double biased = v / static_cast<double>(count);
      const double unbiased = count > 1 ? v / static_cast<double>(count - 1) : biased;
      mean[ch] = m;
      inv_std[ch] = 1.0 / std::sqrt(biased + eps);
      running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * m;
      running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(running_var[ch] + eps);
    }
  }
  Tensor out(x.shape());
  Tensor xhat(x.shape());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * hw;
      const double gm = gamma.value()[ch], bt = beta.value()[ch];
      for (std::size_t i = 0; i < hw; ++i) {
        const double h = (in[off + i] - mean[ch]) * inv_std[ch];
        xhat[off + i] = h;
        out[off + i] = gm * h + bt;
      }
    }
  }
  return make_result(
      std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, hw, training](Node& self) {
        const double* up = self.grad.data();
        const double* gm = self.parents[1]->value.data();
        std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              sum_dy[ch] += up[off + i];
              sum_dy_xhat[ch] += up[off + i] * xhat[off + i];
            }
          }
        }
        if (wants_grad(self, 1)) {
          Tensor& g = self.parents[1]->grad_buffer();
          for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy_xhat[ch];
        }
        if (wants_grad(self, 2)) {
          Tensor& g = self.parents[2]->grad_buffer();
          for (std::size_t ch = 0; ch < c; ++ch) g[ch] += sum_dy[ch];
        }
        if (!wants_grad(self, 0)) return;
        Tensor& g = self.parents[0]->grad_buffer();
        const double m = static_cast<double>(n * hw);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            const double k = gm[ch] * inv_std[ch];
            for (std::size_t i = 0; i < hw; ++i) {
              if (training) {
                g[off + i] += k / m *
                              (m * up[off + i] - sum_dy[ch] - xhat[off + i] * sum_dy_xhat[ch]);
              } else {
                g[off + i] += k * up[off + i];
              }
            }
          }
        }
      });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Shape& shape = x.shape();
  if (shape.empty()) throw ShapeError("layer_norm: scalar input");
  const std::size_t f = shape.back();
  if (gamma.value().size() != f || beta.value().size() != f) {
    throw ShapeError("layer_norm: parameter size does not match feature count");
  }
  const std::size_t rows = x.value().size() / f;
  Tensor out(shape), xhat(shape);
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.value().data() + r * f;
    double m = 0.0;
    for (std::size_t j = 0; j < f; ++j) m += in[j];
    m /= static_cast<double>(f);
    double v = 0.0;
    for (std::size_t j = 0; j < f; ++j) v += (in[j] - m) * (in[j] - m);
    v /= static_cast<double>(f);
    inv_std[r] = 1.0 / std::sqrt(v + eps);
    for (std::size_t j = 0; j < f; ++j) {
      const double h = (in[j] - m) * inv_std[r];
      xhat[r * f + j] = h;
      out[r * f + j] = gamma.value()[j] * h + beta.value()[j];
    }
  }
  return make_result(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std), rows, f](Node& self) {
                       const double* up = self.grad.data();
                       const double* gm = self.parents[1]->value.data();
                       if (wants_grad(self, 1) || wants_grad(self, 2)) {
                         Tensor& gg = self.parents[1]->grad_buffer();
                         Tensor& gb = self.parents[2]->grad_buffer();
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t j = 0; j < f; ++j) {
                             gg[j] += up[r * f + j] * xhat[r * f + j];
                             gb[j] += up[r * f + j];
                           }
                         }
                       }
                       if (!wants_grad(self, 0)) return;
                       Tensor& g = self.parents[0]->grad_buffer();
                       const double nf = static_cast<double>(f);
                       for (std::size_t r = 0; r < rows; ++r) {
                         double s1 = 0.0, s2 = 0.0;
                         for (std::size_t j = 0; j < f; ++j) {
                           const double dh = up[r * f + j] * gm[j];
                           s1 += dh;
                           s2 += dh * xhat[r * f + j];
                         }
                         for (std::size_t j = 0; j < f; ++j) {
                           const double dh = up[r * f + j] * gm[j];
                           g[r * f + j] +=
                               inv_std[r] / nf * (nf * dh - s1 - xhat[r * f + j] * s2);
                         }
                       }
                     });
}

}  // namespace dfbench::nn

#pragma once

#include <span>
#include <vector>

#include "dfbench/nn/autograd.hpp"

namespace dfbench::nn {

// Elementwise, same shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
// Adds a constant broadcast numpy-style (right-aligned, size-1 axes expand).
Var add_constant(const Var& a, const Tensor& c);

Var sum(const Var& a);
Var mean(const Var& a);
Var mean_axis(const Var& a, std::size_t axis);

Var reshape(const Var& a, Shape shape);
Var permute(const Var& a, const std::vector<std::size_t>& perm);
Var concat(const std::vector<Var>& parts, std::size_t axis);
// Slice `index` of the leading axis; the axis is dropped.
Var select(const Var& a, std::size_t index);
// Cyclic shift along each axis; shifts.size() == rank.
Var roll(const Var& a, const std::vector<long>& shifts);

// [M,K] x [K,N]
Var matmul(const Var& a, const Var& b);
// [B,M,K] x [B,K,N], or x [B,N,K]^T when transpose_b.
Var bmm(const Var& a, const Var& b, bool transpose_b = false);
// x[..., in] * W[out, in]^T + b[out]; bias may be undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);

Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var gelu(const Var& x);
Var sigmoid(const Var& x);
// Along the last axis.
Var softmax(const Var& x);

// mu + exp(logvar / 2) * noise
Var reparameterize(const Var& mu, const Var& logvar, const Tensor& noise);

// Mean negative log-softmax at the label index; logits [N, C].
Var cross_entropy_with_logits(const Var& logits, std::span<const int> labels);
Var mse(const Var& prediction, const Tensor& target);
// -0.5 * sum(1 + logvar - mu^2 - exp(logvar)) averaged over the leading axis.
Var kl_divergence(const Var& mu, const Var& logvar);

// NCHW convolutions. weight is [out, in/groups, kh, kw] for conv2d and
// [in, out, kh, kw] for conv_transpose2d. bias may be undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride,
           std::size_t padding, std::size_t groups = 1);
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride,
                     std::size_t padding);
Var max_pool2d(const Var& x, std::size_t kernel, std::size_t stride);

// Per-channel normalization of [N, C, H, W]. In training mode batch statistics
// are used and the running buffers are updated in place.
Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                 Tensor& running_var, bool training, double momentum, double eps);
// Normalization over the last axis.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps);

}  // namespace dfbench::nn

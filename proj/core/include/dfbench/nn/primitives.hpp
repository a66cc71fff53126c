#pragma once

// Reference (float64, non-differentiable) implementations of the activation,
// loss and convolution formulas the detectors are built on. The autograd ops
// in ops.hpp share these semantics and are tested against them.

#include <functional>
#include <map>
#include <string>

#include "dfbench/tensor.hpp"

namespace dfbench::nn {

// The argument of every log is floored at kProbEps.
inline constexpr double kProbEps = 1e-7;

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
// Exact erf form: x * 0.5 * (1 + erf(x / sqrt(2))).
Tensor gelu(const Tensor& x);
// Throws ConfigError unless slope is in (0, 1).
Tensor leaky_relu(const Tensor& x, double slope);

double sigmoid(double x);
double gelu(double x);

struct LossValue {
  double value = 0.0;
  std::map<std::string, double> components;
};

LossValue mse_loss(const Tensor& x, const Tensor& x_hat);

// Binary cross entropy, -mean[x log p + (1-x) log(1-p)], with 0*log(0) = 0.
LossValue cross_entropy_loss(const Tensor& labels, const Tensor& probs);

// Negative Bernoulli log-likelihood of x under p = x_hat, averaged over elements.
// Alternative reconstruction term to mse_loss.
LossValue bernoulli_nll_loss(const Tensor& x, const Tensor& x_hat);

// KL(N(mu, exp(logvar)) || N(0, I)). Rank-1 inputs are a single sample; for
// rank >= 2 the leading axis is the batch and the result is the batch mean of
// per-sample sums.
LossValue kl_diag_gaussian(const Tensor& mu, const Tensor& logvar);

// recon + beta * kl. beta must be >= 0.
LossValue vae_total_loss(const LossValue& recon, const LossValue& kl, double beta = 1.0);

struct AdversarialObjectives {
  LossValue discriminator;  // mean[log D(x)] + mean[log(1 - D(G(z)))]
  LossValue generator;      // mean[log(1 - D(G(z)))]
};
AdversarialObjectives adversarial_losses(const Tensor& d_real, const Tensor& d_fake);

// Full discrete convolution, length |f| + |g| - 1.
Tensor conv1d_reference(const Tensor& f, const Tensor& g);

// Analytic gradients of the losses above with respect to their second argument
// (x_hat / probs), or both mu and logvar for KL.
Tensor mse_loss_grad(const Tensor& x, const Tensor& x_hat);
Tensor cross_entropy_loss_grad(const Tensor& labels, const Tensor& probs);
struct KlGrad {
  Tensor mu;
  Tensor logvar;
};
KlGrad kl_diag_gaussian_grad(const Tensor& mu, const Tensor& logvar);

using ScalarFunction = std::function<double(const Tensor&)>;
using GradientFunction = std::function<Tensor(const Tensor&)>;

// Compares `gradient(x)` against central finite differences of `fn` around x
// and returns the largest componentwise relative error
// |a - n| / max(|a|, |n|, abs_floor). Throws NumericError on non-finite fn values.
double grad_check(const ScalarFunction& fn, const GradientFunction& gradient, const Tensor& x,
                  double eps = 1e-5, double abs_floor = 1e-8);

}  // namespace dfbench::nn

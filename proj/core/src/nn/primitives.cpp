#include "dfbench/nn/primitives.hpp"

#include <algorithm>
#include <cmath>

#include "dfbench/errors.hpp"

namespace dfbench::nn {

namespace {

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

double clamp_prob(double p) { return std::max(p, kProbEps); }

// x*log(p) with the 0*log(0) = 0 convention applied before clamping.
double xlogp(double x, double p) {
  if (x == 0.0) return 0.0;
  return x * std::log(clamp_prob(p));
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gelu(double x) { return x * 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

Tensor sigmoid(const Tensor& x) { return map(x, [](double v) { return sigmoid(v); }); }

Tensor relu(const Tensor& x) { return map(x, [](double v) { return v > 0.0 ? v : 0.0; }); }

Tensor gelu(const Tensor& x) { return map(x, [](double v) { return gelu(v); }); }

Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw ConfigError("leaky_relu slope must be in (0,1), got " + std::to_string(slope));
  }
  return map(x, [slope](double v) { return v >= 0.0 ? v : slope * v; });
}

LossValue mse_loss(const Tensor& x, const Tensor& x_hat) {
  require_same_shape(x, x_hat, "mse_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - x_hat[i];
    acc += d * d;
  }
  LossValue out;
  out.value = x.empty() ? 0.0 : acc / static_cast<double>(x.size());
  out.components["mse"] = out.value;
  return out;
}

LossValue cross_entropy_loss(const Tensor& labels, const Tensor& probs) {
  require_same_shape(labels, probs, "cross_entropy_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    acc += xlogp(labels[i], probs[i]) + xlogp(1.0 - labels[i], 1.0 - probs[i]);
  }
  LossValue out;
  out.value = labels.empty() ? 0.0 : -acc / static_cast<double>(labels.size());
  // -0.0 for perfect predictions
  if (out.value == 0.0) out.value = 0.0;
  out.components["ce"] = out.value;
  return out;
}

LossValue bernoulli_nll_loss(const Tensor& x, const Tensor& x_hat) {
  LossValue out = cross_entropy_loss(x, x_hat);
  out.components.clear();
  out.components["nll"] = out.value;
  return out;
}

LossValue kl_diag_gaussian(const Tensor& mu, const Tensor& logvar) {
  require_same_shape(mu, logvar, "kl_diag_gaussian");
  const std::size_t batch = mu.rank() >= 2 ? mu.dim(0) : 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    acc += 1.0 + logvar[i] - mu[i] * mu[i] - std::exp(logvar[i]);
  }
  LossValue out;
  out.value = batch == 0 ? 0.0 : -0.5 * acc / static_cast<double>(batch);
  if (out.value == 0.0) out.value = 0.0;
  out.components["kl"] = out.value;
  return out;
}

LossValue vae_total_loss(const LossValue& recon, const LossValue& kl, double beta) {
  if (beta < 0.0) throw ConfigError("vae_total_loss: beta must be >= 0");
  LossValue out;
  out.value = recon.value + beta * kl.value;
  out.components["recon"] = recon.value;
  out.components["kl"] = kl.value;
  out.components["beta"] = beta;
  return out;
}

AdversarialObjectives adversarial_losses(const Tensor& d_real, const Tensor& d_fake) {
  auto mean_log = [](const Tensor& t, bool complement) {
    double acc = 0.0;
    for (double p : t.values()) acc += std::log(clamp_prob(complement ? 1.0 - p : p));
    return t.empty() ? 0.0 : acc / static_cast<double>(t.size());
  };
  const double log_real = mean_log(d_real, false);
  const double log_fake = mean_log(d_fake, true);

  AdversarialObjectives out;
  out.discriminator.value = log_real + log_fake;
  out.discriminator.components["log_d_real"] = log_real;
  out.discriminator.components["log_one_minus_d_fake"] = log_fake;
  out.generator.value = log_fake;
  out.generator.components["log_one_minus_d_fake"] = log_fake;
  return out;
}

Tensor conv1d_reference(const Tensor& f, const Tensor& g) {
  if (f.empty() || g.empty()) throw ShapeError("conv1d_reference: empty input");
  if (f.rank() != 1 || g.rank() != 1) throw ShapeError("conv1d_reference: inputs must be rank-1");
  const std::size_t n = f.size() + g.size() - 1;
  Tensor h({n});
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    // i ranges over indices where both f(i) and g(k-i) exist
    const std::size_t lo = k >= g.size() - 1 ? k - (g.size() - 1) : 0;
    const std::size_t hi = std::min(k, f.size() - 1);
    for (std::size_t i = lo; i <= hi; ++i) acc += f[i] * g[k - i];
    h[k] = acc;
  }
  return h;
}

Tensor mse_loss_grad(const Tensor& x, const Tensor& x_hat) {
  require_same_shape(x, x_hat, "mse_loss_grad");
  Tensor g(x.shape());
  const double scale = 2.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = scale * (x_hat[i] - x[i]);
  return g;
}

Tensor cross_entropy_loss_grad(const Tensor& labels, const Tensor& probs) {
  require_same_shape(labels, probs, "cross_entropy_loss_grad");
  Tensor g(labels.shape());
  const double n = static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probs[i], y = labels[i];
    // Each log is flat where its argument sits on the floor.
    const double d_pos = (y == 0.0 || p < kProbEps) ? 0.0 : y / p;
    const double d_neg = (y == 1.0 || 1.0 - p < kProbEps) ? 0.0 : (1.0 - y) / (1.0 - p);
    g[i] = -(d_pos - d_neg) / n;
  }
  return g;
}

KlGrad kl_diag_gaussian_grad(const Tensor& mu, const Tensor& logvar) {
  require_same_shape(mu, logvar, "kl_diag_gaussian_grad");
  const double batch = mu.rank() >= 2 ? static_cast<double>(mu.dim(0)) : 1.0;
  KlGrad g{Tensor(mu.shape()), Tensor(mu.shape())};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    g.mu[i] = mu[i] / batch;
    g.logvar[i] = 0.5 * (std::exp(logvar[i]) - 1.0) / batch;
  }
  return g;
}

double grad_check(const ScalarFunction& fn, const GradientFunction& gradient, const Tensor& x,
                  double eps, double abs_floor) {
  const Tensor analytic = gradient(x);
  require_same_shape(analytic, x, "grad_check");
  Tensor probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double plus = fn(probe);
    probe[i] = orig - eps;
    const double minus = fn(probe);
    probe[i] = orig;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("grad_check: non-finite function value at component " + std::to_string(i));
    }
    const double numeric = (plus - minus) / (2.0 * eps);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace dfbench::nn

#include <gtest/gtest.h>

#include <cmath>

#include "dfbench/errors.hpp"
#include "dfbench/nn/layers.hpp"
#include "dfbench/nn/ops.hpp"
#include "dfbench/nn/primitives.hpp"
#include "synthetic.hpp"

using namespace dfbench;
using namespace dfbench::nn;
using dfbench::testing::op_grad_error;
using dfbench::testing::random_tensor;

namespace {

constexpr double kTol = 1e-5;

}  // namespace

TEST(OpsGrad, Elementwise) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({3, 4}, rng);
  const Var other(random_tensor({3, 4}, rng));
  EXPECT_LT(op_grad_error([&](const Var& v) { return add(v, other); }, x), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return sub(other, v); }, x), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return mul(v, other); }, x), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return mul(v, v); }, x), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return scale(v, -2.5); }, x), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return add_constant(v, Tensor({4}, 0.3)); }, x), kTol);
}

TEST(OpsGrad, Activations) {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({20}, rng, -3, 3);
  EXPECT_LT(op_grad_error([](const Var& v) { return relu(v); }, x), kTol);
  EXPECT_LT(op_grad_error([](const Var& v) { return leaky_relu(v, 0.2); }, x), kTol);
  EXPECT_LT(op_grad_error([](const Var& v) { return gelu(v); }, x), kTol);
  EXPECT_LT(op_grad_error([](const Var& v) { return sigmoid(v); }, x), kTol);
  EXPECT_LT(op_grad_error([](const Var& v) { return softmax(reshape(v, {4, 5})); }, x), kTol);
}

TEST(OpsGrad, ActivationsMatchReference) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({50}, rng, -4, 4);
  EXPECT_EQ(relu(Var(x)).value(), nn::relu(x));
  EXPECT_EQ(sigmoid(Var(x)).value(), nn::sigmoid(x));
  const Tensor g = gelu(Var(x)).value(), ref = nn::gelu(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], ref[i], 1e-14);
}

TEST(OpsGrad, Reductions) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({2, 3, 4}, rng);
  EXPECT_LT(op_grad_error([](const Var& v) { return mean(v); }, x), kTol);
  EXPECT_LT(op_grad_error([](const Var& v) { return mean_axis(v, 1); }, x), kTol);
  EXPECT_LT(op_grad_error([](const Var& v) { return sum(v); }, x), kTol);
}

TEST(OpsGrad, ShapeOps) {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({2, 3, 4}, rng);
  const Var other(random_tensor({2, 2, 4}, rng));
  EXPECT_LT(op_grad_error([](const Var& v) { return permute(v, {2, 0, 1}); }, x), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return concat({v, other}, 1); }, x), kTol);
  EXPECT_LT(op_grad_error([](const Var& v) { return select(v, 1); }, x), kTol);
  EXPECT_LT(op_grad_error([](const Var& v) { return roll(v, {0, 1, -2}); }, x), kTol);
  EXPECT_THROW(reshape(Var(x), {5, 5}), ShapeError);
}

TEST(OpsGrad, MatrixProducts) {
  std::mt19937_64 rng(6);
  const Tensor a = random_tensor({3, 4}, rng);
  const Var b(random_tensor({4, 5}, rng));
  EXPECT_LT(op_grad_error([&](const Var& v) { return matmul(v, b); }, a), kTol);
  const Tensor batch = random_tensor({2, 3, 4}, rng);
  const Var rhs(random_tensor({2, 5, 4}, rng));
  EXPECT_LT(op_grad_error([&](const Var& v) { return bmm(v, rhs, true); }, batch), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return bmm(rhs, v, false); }, random_tensor({2, 4, 3}, rng)), kTol);
  const Var w(random_tensor({6, 4}, rng)), bias(random_tensor({6}, rng));
  EXPECT_LT(op_grad_error([&](const Var& v) { return linear(v, w, bias); }, a), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return linear(Var(a), v, bias); }, w.value()), kTol);
}

TEST(OpsGrad, Convolutions) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({2, 3, 6, 6}, rng);
  const Var w(random_tensor({4, 3, 3, 3}, rng)), b(random_tensor({4}, rng));
  EXPECT_LT(op_grad_error([&](const Var& v) { return conv2d(v, w, b, 2, 1); }, x), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return conv2d(Var(x), v, b, 1, 1); }, w.value()), kTol);
  const Var dw(random_tensor({3, 1, 3, 3}, rng));
  EXPECT_LT(op_grad_error([&](const Var& v) { return conv2d(v, dw, Var(), 1, 1, 3); }, x), kTol);
  const Var wt(random_tensor({3, 2, 2, 2}, rng));
  EXPECT_LT(op_grad_error([&](const Var& v) { return conv_transpose2d(v, wt, Var(), 2, 0); }, x), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return conv_transpose2d(Var(x), v, Var(), 2, 0); }, wt.value()), kTol);
  EXPECT_LT(op_grad_error([](const Var& v) { return max_pool2d(v, 2, 2); }, x), kTol);
}

TEST(OpsGrad, ConvMatchesDirectSum) {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({1, 2, 5, 5}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor y = conv2d(Var(x), Var(w), Var(), 1, 1).value();
  for (std::size_t o = 0; o < 3; ++o) {
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < 2; ++c) {
          for (int ki = 0; ki < 3; ++ki) {
            for (int kj = 0; kj < 3; ++kj) {
              const int yi = i + ki - 1, xj = j + kj - 1;
              if (yi < 0 || xj < 0 || yi >= 5 || xj >= 5) continue;
              acc += x[(c * 5 + yi) * 5 + xj] * w[((o * 2 + c) * 3 + ki) * 3 + kj];
            }
          }
        }
        EXPECT_NEAR(y[(o * 5 + i) * 5 + j], acc, 1e-12);
      }
    }
  }
}

TEST(OpsGrad, Normalisation) {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({3, 2, 3, 3}, rng);
  const Var gamma(random_tensor({2}, rng, 0.5, 1.5)), beta(random_tensor({2}, rng));
  Tensor rm({2}), rv({2}, 1.0);
  EXPECT_LT(op_grad_error(
                [&](const Var& v) { return batch_norm2d(v, gamma, beta, rm, rv, true, 0.1, 1e-5); }, x),
            1e-4);
  EXPECT_LT(op_grad_error(
                [&](const Var& v) { return batch_norm2d(Var(x), v, beta, rm, rv, true, 0.1, 1e-5); },
                gamma.value()),
            1e-4);
  const Tensor t = random_tensor({4, 6}, rng);
  const Var g(random_tensor({6}, rng, 0.5, 1.5)), bb(random_tensor({6}, rng));
  EXPECT_LT(op_grad_error([&](const Var& v) { return layer_norm(v, g, bb, 1e-6); }, t), 1e-4);
}

TEST(OpsGrad, Losses) {
  std::mt19937_64 rng(10);
  const Tensor logits = random_tensor({5, 2}, rng, -2, 2);
  const std::vector<int> labels{0, 1, 1, 0, 1};
  EXPECT_LT(op_grad_error([&](const Var& v) { return cross_entropy_with_logits(v, labels); }, logits), kTol);
  const Tensor target = random_tensor({5, 2}, rng);
  EXPECT_LT(op_grad_error([&](const Var& v) { return mse(v, target); }, logits), kTol);
  const Var lv(random_tensor({5, 2}, rng));
  EXPECT_LT(op_grad_error([&](const Var& v) { return kl_divergence(v, lv); }, logits), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return kl_divergence(Var(logits), v); }, lv.value()), kTol);
  const Tensor noise = random_tensor({5, 2}, rng);
  EXPECT_LT(op_grad_error([&](const Var& v) { return reparameterize(v, lv, noise); }, logits), kTol);
  EXPECT_LT(op_grad_error([&](const Var& v) { return reparameterize(Var(logits), v, noise); }, lv.value()), kTol);
}

TEST(OpsGrad, LossesMatchReference) {
  std::mt19937_64 rng(11);
  const Tensor mu = random_tensor({3, 4}, rng), lv = random_tensor({3, 4}, rng);
  EXPECT_NEAR(kl_divergence(Var(mu), Var(lv)).value().item(), kl_diag_gaussian(mu, lv).value, 1e-12);
  const Tensor a = random_tensor({3, 4}, rng);
  EXPECT_NEAR(mse(Var(a), mu).value().item(), mse_loss(mu, a).value, 1e-14);
  // Two-class softmax CE equals binary CE on the fake probability.
  const Tensor logits = random_tensor({3, 2}, rng);
  const std::vector<int> labels{1, 0, 1};
  Tensor p({3}), y({3});
  for (std::size_t i = 0; i < 3; ++i) {
    p[i] = sigmoid(logits[2 * i + 1] - logits[2 * i]);
    y[i] = labels[i];
  }
  EXPECT_NEAR(cross_entropy_with_logits(Var(logits), labels).value().item(),
              cross_entropy_loss(y, p).value, 1e-9);
}

TEST(Reparameterize, Examples) {
  const Tensor mu = Tensor::vector({0.5, -1.0});
  const Var z0 = reparameterize(Var(mu), Var(Tensor({2})), Tensor({2}));
  EXPECT_EQ(z0.value(), mu);
  const Var z1 = reparameterize(Var(mu), Var(Tensor({2})), Tensor({2}, 1.0));
  EXPECT_EQ(z1.value(), Tensor::vector({1.5, 0.0}));
  EXPECT_THROW(reparameterize(Var(mu), Var(Tensor({3})), Tensor({2})), ShapeError);
}

TEST(Autograd, AccumulatesThroughSharedNodes) {
  Var x(Tensor::vector({2.0, -3.0}), true);
  Var y = add(mul(x, x), scale(x, 3.0));  // x^2 + 3x
  sum(y).backward();
  EXPECT_EQ(x.grad(), Tensor::vector({7.0, -3.0}));
}

TEST(Autograd, NoGradGuardSkipsGraph) {
  Var x(Tensor::vector({1.0}), true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    Var y = scale(x, 2.0);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
}

TEST(Autograd, BackwardNeedsScalar) {
  Var x(Tensor::vector({1.0, 2.0}), true);
  EXPECT_THROW(scale(x, 2.0).backward(), ShapeError);
}

TEST(Layers, StateDictRoundTrip) {
  Rng rng(3);
  Linear a(4, 3, rng), b(4, 3, rng);
  EXPECT_NE(state_dict(a), state_dict(b));
  load_state_dict(b, state_dict(a));
  EXPECT_EQ(state_dict(a), state_dict(b));
  StateDict bad = state_dict(a);
  bad.erase(bad.begin());
  EXPECT_THROW(load_state_dict(b, bad), FormatError);
  StateDict wrong = state_dict(a);
  wrong.begin()->second = Tensor({1});
  EXPECT_THROW(load_state_dict(b, wrong), FormatError);
  StateDict extra = state_dict(a);
  extra["unexpected"] = Tensor({1});
  EXPECT_THROW(load_state_dict(b, extra), FormatError);
}

TEST(Layers, BatchNormTracksRunningStats) {
  BatchNorm2d bn(2);
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({4, 2, 3, 3}, rng, 2.0, 4.0);
  bn.forward(Var(x));
  const auto buffers = bn.named_buffers();
  ASSERT_EQ(buffers.size(), 2u);
  EXPECT_GT((*buffers[0].second)[0], 0.2);  // running_mean moved toward ~3
  bn.set_training(false);
  const Tensor y1 = bn.forward(Var(x)).value();
  const Tensor y2 = bn.forward(Var(x)).value();
  EXPECT_EQ(y1, y2);
}

#include <benchmark/benchmark.h>

#include <random>

#include "dfbench/data/augment.hpp"
#include "dfbench/eval/metrics.hpp"
#include "dfbench/model/baselines.hpp"
#include "dfbench/model/genconvit.hpp"
#include "dfbench/nn/ops.hpp"

using namespace dfbench;
using dfbench::nn::Var;

namespace {

Tensor uniform(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Var x(uniform({4, c, 32, 32}, 1)), w(uniform({c, c, 3, 3}, 2)), b(uniform({c}, 3));
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, w, b, 1, 1));
}
BENCHMARK(BM_Conv2d)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const Var x(uniform({4, 16, 32, 32}, 1)), w(uniform({16, 16, 3, 3}, 2)), b(uniform({16}, 3));
  for (auto _ : state) {
    Var y = nn::mean(nn::conv2d(x, w, b, 1, 1));
    y.backward();
  }
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

template <typename Net>
void forward_batch(benchmark::State& state, Net& net) {
  net.set_training(false);
  const Var x(uniform({static_cast<std::size_t>(state.range(0)), 3, net.input_size(), net.input_size()}, 4));
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_NetworkADesk(benchmark::State& state) {
  model::NetworkA net(model::GenConViTConfig::desk(), 1);
  forward_batch(state, net);
}
BENCHMARK(BM_NetworkADesk)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_NetworkBDesk(benchmark::State& state) {
  model::NetworkB net(model::GenConViTConfig::desk(), 1);
  forward_batch(state, net);
}
BENCHMARK(BM_NetworkBDesk)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Meso4Desk(benchmark::State& state) {
  model::Meso4 net(model::Meso4Config::for_preset(model::ScalePreset::desk), 1);
  forward_batch(state, net);
}
BENCHMARK(BM_Meso4Desk)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_NetworkAPaperTiny(benchmark::State& state) {
  model::NetworkA net(model::GenConViTConfig::paper_tiny(), 1);
  forward_batch(state, net);
}
BENCHMARK(BM_NetworkAPaperTiny)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_SpslPhase(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  const Tensor img = uniform({3, s, s}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(model::spsl_phase_features(img));
}
BENCHMARK(BM_SpslPhase)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_Augment(benchmark::State& state) {
  const Tensor img = uniform({3, 64, 64}, 6);
  data::AugmentationConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(data::augment(img, cfg, seed++));
}
BENCHMARK(BM_Augment)->Unit(benchmark::kMicrosecond);

std::vector<eval::PredictionRecord> records(std::size_t n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<eval::PredictionRecord> rs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rs[i].sample_id = std::to_string(i);
    rs[i].true_label = i % 2 ? data::Label::fake : data::Label::real;
    rs[i].method = i % 2 ? "retalking" : data::kOriginalMethod;
    rs[i].score = u(rng);
  }
  return rs;
}

void BM_RankAuc(benchmark::State& state) {
  const auto rs = records(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(eval::rank_auc(rs));
}
BENCHMARK(BM_RankAuc)->Arg(1472)->Arg(100000)->Unit(benchmark::kMicrosecond);

void BM_BuildReport(benchmark::State& state) {
  const auto rs = records(1472);
  for (auto _ : state) benchmark::DoNotOptimize(eval::build_report("bench", rs));
}
BENCHMARK(BM_BuildReport)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();

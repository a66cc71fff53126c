// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "dfbench/data/augment.hpp"
#include "dfbench/data/manifest.hpp"
#include "dfbench/eval/metrics.hpp"
#include "dfbench/eval/predict.hpp"
#include "dfbench/model/baselines.hpp"
#include "dfbench/model/genconvit.hpp"
#include "dfbench/nn/ops.hpp"
#include "dfbench/nn/primitives.hpp"
#include "dfbench/train/checkpoint.hpp"
#include "dfbench/train/finetune.hpp"
#include "dfbench_cli/cli.hpp"
#include "synthetic.hpp"

using namespace dfbench;
using dfbench::nn::Var;
using dfbench::testing::random_tensor;
using dfbench::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failed expectation.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && out_.pass) {
      out_.pass = false;
      out_.detail = what;
    }
  }
  void note(const std::string& s) {
    if (out_.pass) out_.detail = s;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor image_batch(std::size_t n, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_tensor({n, 3, size, size}, rng, 0.0, 1.0);
}

Outcome metric_oracle() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::size_t auc_sets = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto rs = dfbench::testing::random_records(1 + rng() % 200, rng, trial % 2 == 0);
    const double t = std::uniform_real_distribution<double>(0, 1)(rng);
    double tp = 0, fp = 0, tn = 0, fn = 0;
    for (const auto& r : rs) {
      const bool fake = r.true_label == data::Label::fake, pred = r.score >= t;
      (fake ? (pred ? tp : fn) : (pred ? fp : tn)) += 1;
    }
    const auto cm = eval::confusion(rs, t);
    c.expect(cm.tp == tp && cm.fp == fp && cm.tn == tn && cm.fn == fn,
             "confusion mismatch in trial " + std::to_string(trial));
    const auto m = eval::scalar_metrics(cm);
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0, r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    c.expect(m.accuracy == (tp + tn) / rs.size(), "accuracy mismatch");
    c.expect(m.precision == p, "precision mismatch");
    c.expect(m.recall == r, "recall mismatch");
    c.expect(m.f1 == (p + r > 0 ? 2 * p * r / (p + r) : 0.0), "f1 mismatch");
    if (tp + fn > 0 && tn + fp > 0) {
      ++auc_sets;
      const double rank = eval::rank_auc(rs), trap = eval::roc_curve(rs).auc;
      c.expect(std::abs(rank - trap) <= 1e-9, "rank vs trapezoid AUC differ by " + fmt(rank - trap));
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 30.0, "took " + fmt(secs) + " s");
  c.note("1000 sets, " + std::to_string(auc_sets) + " with both classes, " + fmt(secs, 3) + " s");
  return c.result();
}

Outcome timing_reproduction() {
  Check c;
  auto two = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  const auto a = eval::timing_stats(5097.0, 1472), b = eval::timing_stats(35753.0, 1472);
  c.expect(two(a.mean_seconds) == "3.46", "5097/1472 gave " + two(a.mean_seconds));
  c.expect(two(b.mean_seconds) == "24.29", "35753/1472 gave " + two(b.mean_seconds));
  c.expect(a.mean_seconds == 5097.0 / 1472 && b.mean_seconds == 35753.0 / 1472, "inexact division");
  c.note(two(a.mean_seconds) + " s and " + two(b.mean_seconds) + " s per sample");
  return c.result();
}

Outcome shape_chain() {
  Check c;
  const auto cfg = model::GenConViTConfig::paper_tiny();
  const Tensor x = image_batch(1, 224, 3);
  nn::NoGradGuard guard;

  model::NetworkA a(cfg, 1);
  a.set_training(false);
  const Var latent = a.autoencoder().encode(Var(x));
  c.expect(latent.shape() == Shape{1, 256, 7, 7}, "AE latent shape");
  c.expect(a.autoencoder().decode(latent).shape() == Shape{1, 3, 224, 224}, "AE reconstruction shape");
  const Var feats = a.backbone().convnext().forward(Var(x));
  const Var tokens = a.backbone().embed().forward(feats);
  c.expect(tokens.shape().size() == 3 && tokens.shape()[2] == 768, "hybrid embed width");
  c.expect(a.forward(Var(x)).logits.shape() == Shape{1, 2}, "network A logits");

  model::NetworkB b(cfg, 2);
  b.set_training(false);
  const auto post = b.vae().encode(Var(x));
  c.expect(post.mu.shape() == Shape{1, 12544}, "VAE mu length");
  c.expect(post.logvar.shape() == Shape{1, 12544}, "VAE logvar length");
  c.expect(b.vae().decode(post.mu).shape() == Shape{1, 3, 112, 112}, "VAE reconstruction shape");
  const auto out = b.forward(Var(x));
  c.expect(out.logits.shape() == Shape{1, 2}, "network B logits");
  c.expect(out.reconstruction.shape() == Shape{1, 3, 112, 112}, "network B reconstruction");
  c.note("latent 256x7x7, mu/logvar 12544, recon 3x112x112, embed 768, logits 2+2");
  return c.result();
}

// Relative error between autograd and central differences at a few coordinates
// of the named parameters.
double network_slice_error(model::Detector& net, const std::function<Var()>& loss,
                           const std::vector<std::string>& names) {
  net.zero_grad();
  loss().backward();
  auto params = net.named_parameters();
  std::vector<std::pair<Var, std::size_t>> probes;
  for (const auto& name : names) {
    auto it = std::find_if(params.begin(), params.end(), [&](auto& p) { return p.first == name; });
    if (it == params.end()) throw ConfigError("no parameter " + name);
    for (std::size_t k = 0; k < 3; ++k) probes.emplace_back(it->second, (k * 11) % it->second.value().size());
  }
  const double eps = 1e-6;
  double worst = 0.0;
  nn::NoGradGuard guard;
  for (auto& [p, i] : probes) {
    const double analytic = p.grad()[i], orig = p.value()[i];
    p.mutable_value()[i] = orig + eps;
    const double up = loss().value().item();
    p.mutable_value()[i] = orig - eps;
    const double down = loss().value().item();
    p.mutable_value()[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    worst = std::max(worst, std::abs(analytic - numeric) /
                                std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
  }
  return worst;
}

Outcome gradient_fidelity() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(4);
  double losses = 0.0;
  {
    const Tensor target = random_tensor({12}, rng), x = random_tensor({12}, rng);
    losses = std::max(losses, nn::grad_check([&](const Tensor& p) { return nn::mse_loss(target, p).value; },
                                             [&](const Tensor& p) { return nn::mse_loss_grad(target, p); }, x));
    Tensor labels({6});
    for (std::size_t i = 0; i < 6; ++i) labels[i] = double(i % 2);
    const Tensor probs = random_tensor({6}, rng, 0.1, 0.9);
    losses = std::max(losses, nn::grad_check([&](const Tensor& p) { return nn::cross_entropy_loss(labels, p).value; },
                                             [&](const Tensor& p) { return nn::cross_entropy_loss_grad(labels, p); }, probs));
    const Tensor mu = random_tensor({3, 5}, rng), lv = random_tensor({3, 5}, rng);
    losses = std::max(losses, nn::grad_check([&](const Tensor& m) { return nn::kl_diag_gaussian(m, lv).value; },
                                             [&](const Tensor& m) { return nn::kl_diag_gaussian_grad(m, lv).mu; }, mu));
    losses = std::max(losses, nn::grad_check([&](const Tensor& l) { return nn::kl_diag_gaussian(mu, l).value; },
                                             [&](const Tensor& l) { return nn::kl_diag_gaussian_grad(mu, l).logvar; }, lv));

    // Differentiable versions of the same losses.
    const Tensor logits = random_tensor({4, 2}, rng);
    const std::vector<int> cls{0, 1, 1, 0};
    losses = std::max(losses, dfbench::testing::op_grad_error([&](const Var& v) { return nn::mse(v, target); }, x));
    losses = std::max(losses, dfbench::testing::op_grad_error(
                                  [&](const Var& v) { return nn::cross_entropy_with_logits(v, cls); }, logits));
    losses = std::max(losses, dfbench::testing::op_grad_error(
                                  [&](const Var& v) { return nn::kl_divergence(v, Var(lv)); }, mu));
    losses = std::max(losses, dfbench::testing::op_grad_error(
                                  [&](const Var& v) { return nn::kl_divergence(Var(mu), v); }, lv));
  }
  c.expect(losses < 1e-4, "loss gradient error " + fmt(losses));

  const auto cfg = model::GenConViTConfig::desk();
  const std::vector<int> labels{0, 1};
  model::NetworkB b(cfg, 41);
  b.set_training(false);
  const Tensor xb = image_batch(2, b.input_size(), 42);
  const Tensor noise = random_tensor({2, cfg.vae.latent_dim}, rng);
  const double err_b = network_slice_error(
      b, [&] { return b.loss(b.forward(Var(xb), noise), labels, xb).total; },
      {"vae.encoder0.weight", "vae.decoder_out.weight", "fc2.weight"});
  model::NetworkA a(cfg, 43);
  a.set_training(false);
  const Tensor xa = image_batch(2, a.input_size(), 44);
  const auto params = a.named_parameters();
  const double err_a = network_slice_error(
      a, [&] { return a.loss(a.forward(Var(xa)), labels, xa).total; },
      {params.front().first, params.back().first});
  c.expect(err_b < 1e-3, "network B slice error " + fmt(err_b));
  c.expect(err_a < 1e-3, "network A slice error " + fmt(err_a));
  const double secs = seconds_since(t0);
  c.expect(secs < 120.0, "took " + fmt(secs) + " s");
  c.note("losses " + fmt(losses, 3) + ", network slices " + fmt(err_a, 3) + " / " + fmt(err_b, 3) +
         ", " + fmt(secs, 3) + " s");
  return c.result();
}

Outcome vae_statistics() {
  Check c;
  const Tensor zeros({4, 16}, 0.0);
  c.expect(nn::kl_diag_gaussian(zeros, zeros).value == 0.0, "primitive KL(0,0) != 0");
  c.expect(nn::kl_divergence(Var(zeros), Var(zeros)).value().item() == 0.0, "autograd KL(0,0) != 0");
  std::mt19937_64 rng(5);
  double lowest = 1e300;
  for (int i = 0; i < 100; ++i) {
    const Tensor mu = random_tensor({2, 8}, rng, -3, 3), lv = random_tensor({2, 8}, rng, -4, 4);
    const double a = nn::kl_diag_gaussian(mu, lv).value, b = nn::kl_divergence(Var(mu), Var(lv)).value().item();
    lowest = std::min({lowest, a, b});
  }
  c.expect(lowest >= 0.0, "negative KL " + fmt(lowest));

  const std::size_t n = 10000;
  std::normal_distribution<double> gauss;
  double worst = 0.0;
  for (auto [m, lv] : {std::pair{0.0, 0.0}, {0.7, std::log(0.25)}, {-2.0, 1.0}}) {
    Tensor noise({n});
    for (auto& v : noise.values()) v = gauss(rng);
    const Tensor z = nn::reparameterize(Var(Tensor({n}, m)), Var(Tensor({n}, lv)), noise).value();
    double mean = 0.0;
    for (double v : z.values()) mean += v;
    mean /= n;
    const double bound = 3.0 * std::exp(lv / 2) / std::sqrt(double(n));
    worst = std::max(worst, std::abs(mean - m) / bound);
  }
  c.expect(worst <= 1.0, "reparameterized mean off by " + fmt(worst) + " bounds");
  c.note("min KL " + fmt(lowest, 3) + ", worst MC deviation " + fmt(worst, 3) + " of 3 sigma");
  return c.result();
}

Outcome overfit() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto reg = model::DetectorRegistry::with_builtin();
  const train::Dataset data = dfbench::testing::blob_dataset(32, 64, 14);
  std::string summary;
  for (const char* name : {"genconvit_ae", "genconvit_vae", "meso4"}) {
    auto det = reg.create(name, {model::ScalePreset::desk, 7});
    auto cfg = train::TrainConfig::defaults_for(name);
    cfg.adam.lr = 1e-4;
    cfg.batch_size = 4;
    cfg.epochs = {30};
    cfg.augment = false;
    cfg.eval_train = true;
    cfg.seed = 7;
    double best = 0.0;
    std::size_t reached = 0;
    train::finetune(*det, cfg, data, data, [&](const train::EpochLog& e) {
      best = std::max(best, e.train_accuracy);
      if (best >= 0.95 && reached == 0) reached = e.epoch;
      return reached == 0;
    });
    c.expect(best >= 0.95, std::string(name) + " peaked at " + fmt(best, 3));
    summary += std::string(summary.empty() ? "" : ", ") + name + " epoch " + std::to_string(reached);
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 300.0, "took " + fmt(secs) + " s");
  c.note(summary + ", " + fmt(secs, 3) + " s");
  return c.result();
}

std::vector<data::ManifestEntry> labelled_entries(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> methods{"facefusion_gan", "retalking", "wav2lip"};
  std::vector<data::ManifestEntry> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& e = out[i];
    e.sample_id = "clip" + std::to_string(i);
    e.frames = {"f.png"};
    if (std::bernoulli_distribution(0.37)(rng)) {
      e.label = data::Label::fake;
      e.method = methods[rng() % methods.size()];
    }
  }
  return out;
}

Outcome pipeline_proportions() {
  Check c;
  const auto entries = labelled_entries(1000, 6);
  double overall = 0;
  for (const auto& e : entries) overall += e.label == data::Label::fake;
  overall /= entries.size();
  double worst = 0.0;
  for (auto [spec, want] : {std::pair{std::string("80,15,5"), std::array<std::size_t, 3>{800, 150, 50}},
                            {std::string("87,10,3"), std::array<std::size_t, 3>{870, 100, 30}}}) {
    const auto a = data::split_dataset(entries, data::SplitSpec::parse(spec, 99));
    const auto b = data::split_dataset(entries, data::SplitSpec::parse(spec, 99));
    std::array<std::size_t, 3> count{};
    std::array<double, 3> fakes{};
    bool same = a.size() == b.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto s = static_cast<std::size_t>(a[i].split);
      c.expect(s < 3, "unassigned entry");
      if (s >= 3) continue;
      ++count[s];
      fakes[s] += a[i].label == data::Label::fake;
      same = same && a[i].sample_id == b[i].sample_id && a[i].split == b[i].split;
    }
    c.expect(count == want, spec + " gave " + std::to_string(count[0]) + "/" +
                                std::to_string(count[1]) + "/" + std::to_string(count[2]));
    c.expect(same, spec + " differs between seeded runs");
    for (std::size_t s = 0; s < 3; ++s) {
      if (count[s] > 0) worst = std::max(worst, std::abs(fakes[s] / count[s] - overall));
    }
  }
  c.expect(worst <= 0.02, "fake fraction off by " + fmt(worst));
  c.note("800/150/50 and 870/100/30, fake fraction within " + fmt(worst * 100, 3) + " pts");
  return c.result();
}

Outcome augmentation_rate() {
  Check c;
  std::mt19937_64 rng(8);
  const Tensor img = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
  data::AugmentationConfig cfg;
  cfg.rate = 0.9;
  std::size_t altered = 0;
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor out = data::augment(img, cfg, i);
    altered += !std::ranges::equal(out.values(), img.values());
  }
  const double frac = double(altered) / n;
  c.expect(frac >= 0.87 && frac <= 0.93, "altered fraction " + fmt(frac));
  c.note("altered fraction " + fmt(frac, 4));
  return c.result();
}

// Scores a frame by its mean intensity.
std::vector<double> mean_intensity(const Tensor& images) {
  const std::size_t n = images.dim(0), per = images.size() / n;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < per; ++j) s += images[i * per + j];
    out[i] = s / per;
  }
  return out;
}

Outcome frame_sampling() {
  Check c;
  for (std::size_t count = 1; count <= 60; ++count) {
    for (std::size_t k = 1; k <= 30; ++k) {
      const auto idx = data::sample_frame_indices(count, k);
      c.expect(idx.size() == std::min(count, k), "wrong count for " + std::to_string(count) + "/" + std::to_string(k));
      for (std::size_t i = 1; i < idx.size(); ++i) c.expect(idx[i] > idx[i - 1], "indices not increasing");
      if (!idx.empty()) c.expect(idx.back() < count, "index out of range");
      if (count <= k) {
        for (std::size_t i = 0; i < idx.size(); ++i) c.expect(idx[i] == i, "passthrough broken");
      }
    }
  }

  TempDir dir("accept_frames");
  dfbench::testing::CorpusSpec spec;
  spec.real_clips = 1;
  spec.fake_methods = {"retalking"};
  spec.fake_clips_per_method = 1;
  spec.frames_per_clip = 40;
  spec.image_size = 16;
  spec.seed = 9;
  dfbench::testing::write_synthetic_corpus(dir.path(), spec);
  auto manifest = data::scan_frame_tree(dir.path());
  std::set<std::vector<std::string>> dumps;
  for (std::size_t k : {10, 15, 24}) {
    eval::PredictOptions opt;
    opt.frames = k;
    opt.all_splits = true;
    std::vector<eval::FrameScore> frames;
    eval::predict_manifest(manifest, mean_intensity, 16, opt, &frames);
    std::vector<std::string> dump;
    for (const auto& f : frames) dump.push_back(f.sample_id + "/" + f.frame + "/" + fmt(f.score, 17));
    c.expect(frames.size() == 2 * k, "k=" + std::to_string(k) + " scored " + std::to_string(frames.size()) + " frames");
    dumps.insert(dump);
  }
  c.expect(dumps.size() == 3, "k sweep dumps are not distinct");
  c.note("indices checked for 1800 (count, k) pairs; 3 distinct dumps for k in {10,15,24}");
  return c.result();
}

Outcome fn_attribution() {
  Check c;
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<std::string> methods{"facefusion_gan", "retalking", "wav2lip", "sadtalker"};
    std::map<std::string, std::size_t> misses;
    std::vector<eval::PredictionRecord> rs;
    for (const auto& m : methods) {
      const std::size_t total = 1 + rng() % 20, missed = rng() % (total + 1);
      if (missed > 0) misses[m] = missed;
      for (std::size_t i = 0; i < total; ++i) {
        eval::PredictionRecord r;
        r.sample_id = m + std::to_string(i);
        r.true_label = data::Label::fake;
        r.method = m;
        r.score = i < missed ? 0.49 * (rng() % 100) / 100.0 : 0.5 + 0.5 * (rng() % 100) / 100.0;
        rs.push_back(r);
      }
    }
    for (std::size_t i = 0; i < 15; ++i) {
      eval::PredictionRecord r;
      r.sample_id = "real" + std::to_string(i);
      r.score = (rng() % 100) / 100.0;
      rs.push_back(r);
    }
    std::shuffle(rs.begin(), rs.end(), rng);
    auto got = eval::fn_by_method(rs);
    std::erase_if(got, [](const auto& kv) { return kv.second == 0; });
    std::size_t total = 0;
    for (const auto& [_, v] : got) total += v;
    c.expect(got == misses, "per-method misses differ in trial " + std::to_string(trial));
    c.expect(total == eval::confusion(rs).fn, "fn total differs in trial " + std::to_string(trial));
  }
  c.note("50 constructed dumps, per-method counts exact");
  return c.result();
}

Outcome checkpoint_roundtrip() {
  Check c;
  TempDir dir("accept_ckpt");
  const auto reg = model::DetectorRegistry::with_builtin();
  for (const char* name : {"genconvit_ae", "genconvit_vae", "meso4", "spsl_meso4"}) {
    auto det = reg.create(name, {model::ScalePreset::desk, 12});
    det->set_training(false);
    const Tensor x = image_batch(3, det->input_size(), 13);
    nn::NoGradGuard guard;
    const Tensor before = det->forward(Var(x)).logits.value();
    const auto path = dir / (std::string(name) + ".ckpt");
    train::save_checkpoint(train::snapshot(*det, model::ScalePreset::desk, 12), path);
    auto restored = train::restore_detector(train::load_checkpoint(path), reg);
    restored->set_training(false);
    const Tensor after = restored->forward(Var(x)).logits.value();
    c.expect(before.shape() == after.shape() && std::ranges::equal(before.values(), after.values()),
             std::string(name) + " forward differs after reload");
  }
  c.note("4 detectors bitwise equal after save/load");
  return c.result();
}

Outcome end_to_end() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  TempDir dir("accept_e2e");
  dfbench::testing::CorpusSpec spec;  // 20 real + 2 x 10 fake clips
  spec.seed = 21;
  dfbench::testing::write_synthetic_corpus(dir / "frames", spec);
  auto cli = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = dfbench::cli::run(args, out, err);
    c.expect(code == 0, args[0] + " failed: " + err.str());
    return out.str();
  };
  const auto manifest = (dir / "manifest.jsonl").string();
  cli({"preprocess", "--input", (dir / "frames").string(), "--output", manifest, "--seed", "1"});
  std::vector<std::string> bench{"benchmark", "--out", (dir / "bench").string(), "--dumps"};
  for (const char* model : {"genconvit_ae", "genconvit_vae", "meso4"}) {
    cli({"train", "--manifest", manifest, "--model", model, "--preset", "desk", "--epochs", "2",
         "--out", (dir / "runs").string(), "--seed", "1"});
    const auto dump = (dir / "dumps" / (std::string(model) + ".jsonl")).string();
    cli({"predict", "--manifest", manifest, "--checkpoint",
         (dir / "runs" / (std::string(model) + "_epoch2.ckpt")).string(), "--split", "all", "--output", dump});
    bench.push_back(dump);
  }
  const std::string printed = cli(bench);
  std::ifstream table(dir / "bench" / "comparison.tsv");
  std::string header;
  std::getline(table, header);
  std::vector<std::string> cols;
  std::stringstream hs(header);
  for (std::string col; std::getline(hs, col, '\t');) cols.push_back(col);
  const std::vector<std::string> want{"Model", "Acc", "Acc Real", "Acc Fake", "AUC", "F1", "Precision", "Recall"};
  c.expect(cols == want, "comparison header '" + header + "'");
  std::size_t rows = 0;
  for (std::string line; std::getline(table, line);) rows += !line.empty();
  c.expect(rows == 3, std::to_string(rows) + " comparison rows");
  c.expect(printed.find(header) != std::string::npos, "table not printed");
  const double secs = seconds_since(t0);
  c.expect(secs < 600.0, "took " + fmt(secs) + " s");
  c.note("40 clips, 3 models, 7 metric columns, " + fmt(secs, 3) + " s");
  return c.result();
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric oracle equivalence", metric_oracle},
      {"timing reproduction", timing_reproduction},
      {"shape chain (paper_tiny)", shape_chain},
      {"gradient fidelity", gradient_fidelity},
      {"VAE statistics", vae_statistics},
      {"overfit sanity", overfit},
      {"pipeline determinism and proportions", pipeline_proportions},
      {"augmentation rate", augmentation_rate},
      {"frame sampling", frame_sampling},
      {"FN attribution consistency", fn_attribution},
      {"checkpoint round trip", checkpoint_roundtrip},
      {"end-to-end smoke", end_to_end},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}

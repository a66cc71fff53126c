#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <memory>
#include <regex>
#include <sstream>

#include "dfbench/data/manifest.hpp"
#include "dfbench/eval/report.hpp"
#include "dfbench_cli/cli.hpp"
#include "json.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using dfbench::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run dfb(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dfbench::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> v;
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool one_line(const std::string& s) { return !s.empty() && s.find('\n') == s.size() - 1; }

// Shared corpus, manifest and a small trained meso4 checkpoint.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<TempDir>("cli");
    dfbench::testing::CorpusSpec spec;
    spec.real_clips = 10;
    spec.fake_methods = {"facefusion_gan", "retalking"};
    spec.fake_clips_per_method = 5;
    spec.frames_per_clip = 4;
    spec.image_size = 64;
    spec.seed = 3;
    dfbench::testing::write_synthetic_corpus(root() / "frames", spec);
    const auto pre = dfb({"preprocess", "--input", (root() / "frames").string(), "--output",
                          manifest().string(), "--split", "60,20,20", "--seed", "1"});
    ASSERT_EQ(pre.code, 0) << pre.err;
    const auto tr = dfb({"train", "--manifest", manifest().string(), "--model", "meso4", "--epochs",
                         "1", "--batch-size", "8", "--out", (root() / "meso").string(), "--seed", "2"});
    ASSERT_EQ(tr.code, 0) << tr.err;
  }
  static void TearDownTestSuite() { dir_.reset(); }

  static fs::path root() { return dir_->path(); }
  static fs::path manifest() { return root() / "manifest.jsonl"; }
  static fs::path checkpoint() { return root() / "meso" / "meso4_epoch1.ckpt"; }

  static std::unique_ptr<TempDir> dir_;
};

std::unique_ptr<TempDir> CliTest::dir_;

}  // namespace

TEST_F(CliTest, PreprocessBuildsManifest) {
  const auto r = dfb({"preprocess", "--input", (root() / "frames").string(), "--output",
                      (root() / "pp" / "m.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("entries\t20"), std::string::npos);
  const auto m = dfbench::data::load_manifest(root() / "pp" / "m.jsonl");
  EXPECT_EQ(m.entries.size(), 20u);
  ASSERT_TRUE(m.split.has_value());
  EXPECT_NEAR(m.split->train, 0.80, 1e-12);
  EXPECT_NEAR(m.split->val, 0.15, 1e-12);
  EXPECT_NEAR(m.split->test, 0.05, 1e-12);
  const auto header = nlohmann::json::parse(lines(root() / "pp" / "m.jsonl").at(0));
  EXPECT_DOUBLE_EQ(header.at("split").at("train").get<double>(), 0.8);
  for (const auto& e : m.entries) EXPECT_NE(e.split, dfbench::data::Split::unassigned);
}

TEST_F(CliTest, PreprocessAnonymizes) {
  const auto out = root() / "anon" / "m.jsonl";
  const auto r = dfb({"preprocess", "--input", (root() / "frames").string(), "--output",
                      out.string(), "--anonymize"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto map = root() / "anon" / "anonymization_map.tsv";
  ASSERT_TRUE(fs::exists(map));
  const auto m = dfbench::data::load_manifest(out);
  EXPECT_TRUE(m.anonymized);
  const auto pairs = dfbench::data::read_anonymization_map(map);
  EXPECT_EQ(pairs.size(), 20u);
  const std::regex hex16("[0-9a-f]{16}");
  for (const auto& e : m.entries) EXPECT_TRUE(std::regex_match(e.sample_id, hex16));
  for (const auto& [token, original] : pairs) EXPECT_TRUE(original.rfind("real_", 0) == 0 || original.rfind("fake_", 0) == 0);
}

TEST_F(CliTest, PreprocessErrors) {
  fs::create_directories(root() / "empty");
  auto r = dfb({"preprocess", "--input", (root() / "empty").string(), "--output",
                (root() / "x.jsonl").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_TRUE(one_line(r.err)) << r.err;
  EXPECT_EQ(r.err.rfind("dfbench: error:", 0), 0u);
  r = dfb({"preprocess", "--input", (root() / "frames").string(), "--output",
           (root() / "x.jsonl").string(), "--split", "80,15,10"});
  EXPECT_NE(r.code, 0);
  EXPECT_TRUE(one_line(r.err));
}

TEST_F(CliTest, UsageErrors) {
  auto r = dfb({"train", "--manifest", (root() / "missing.jsonl").string(), "--model", "meso4"});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("dfbench: usage error:", 0), 0u);
  EXPECT_TRUE(one_line(r.err));
  EXPECT_NE(dfb({}).code, 0);
  EXPECT_NE(dfb({"frobnicate"}).code, 0);
  EXPECT_NE(dfb({"predict", "--manifest", manifest().string()}).code, 0);
  EXPECT_NE(dfb({"predict", "--manifest", manifest().string(), "--checkpoint", checkpoint().string(),
                 "--output", "x", "--threshold", "1.5"}).code, 0);
  EXPECT_EQ(dfb({"--help"}).code, 0);
  r = dfb({"train", "--manifest", manifest().string(), "--model", "xception"});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(one_line(r.err));
}

TEST_F(CliTest, TrainWritesSweepCheckpoints) {
  const auto out = root() / "ae";
  const auto r = dfb({"train", "--manifest", manifest().string(), "--model", "genconvit_ae",
                      "--epochs", "4,5", "--frames", "1", "--batch-size", "8", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "genconvit_ae_epoch4.ckpt"));
  EXPECT_TRUE(fs::exists(out / "genconvit_ae_epoch5.ckpt"));
  std::size_t ckpts = 0;
  for (const auto& e : fs::directory_iterator(out)) ckpts += e.path().extension() == ".ckpt";
  EXPECT_EQ(ckpts, 2u);
  EXPECT_EQ(lines(out / "genconvit_ae_log.jsonl").size(), 5u);
}

TEST_F(CliTest, SeedFixesFirstEpochLoss) {
  std::vector<std::string> losses;
  for (int i = 0; i < 2; ++i) {
    const auto out = root() / ("seed" + std::to_string(i));
    const auto r = dfb({"train", "--manifest", manifest().string(), "--model", "meso4", "--epochs",
                        "1", "--batch-size", "8", "--aug-rate", "0.9", "--out", out.string(),
                        "--seed", "11"});
    ASSERT_EQ(r.code, 0) << r.err;
    losses.push_back(nlohmann::json::parse(lines(out / "meso4_log.jsonl").at(0)).at("train_loss").dump());
  }
  EXPECT_EQ(losses[0], losses[1]);

  ::setenv("DFBENCH_SEED", "11", 1);
  const auto out = root() / "seed_env";
  const auto r = dfb({"train", "--manifest", manifest().string(), "--model", "meso4", "--epochs",
                      "1", "--batch-size", "8", "--aug-rate", "0.9", "--out", out.string()});
  ::unsetenv("DFBENCH_SEED");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(lines(out / "meso4_log.jsonl").at(0)).at("train_loss").dump(), losses[0]);
}

TEST_F(CliTest, PredictMeansFrameScores) {
  const auto dump = root() / "pred" / "meso4.jsonl", frames = root() / "pred" / "frames.jsonl";
  const auto r = dfb({"predict", "--manifest", manifest().string(), "--checkpoint",
                      checkpoint().string(), "--frames", "15", "--split", "all", "--output",
                      dump.string(), "--frame-dump", frames.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto recs = dfbench::eval::read_predictions(dump);
  ASSERT_EQ(recs.size(), 20u);
  std::map<std::string, std::vector<double>> per;
  for (const auto& l : lines(frames)) {
    const auto j = nlohmann::json::parse(l);
    per[j.at("sample_id")].push_back(j.at("score"));
  }
  for (const auto& rec : recs) {
    const auto& s = per.at(rec.sample_id);
    EXPECT_LE(s.size(), 15u);
    EXPECT_EQ(s.size(), 4u);
    double mean = 0;
    for (double v : s) mean += v;
    EXPECT_NEAR(rec.score, mean / s.size(), 1e-12);
    EXPECT_GE(rec.latency_seconds, 0.0);
  }
}

TEST_F(CliTest, PredictDeterministicAndFrameSweep) {
  auto scores = [&](const std::string& frames, const std::string& tag) {
    const auto dump = root() / "sweep" / (tag + ".jsonl");
    const auto r = dfb({"predict", "--manifest", manifest().string(), "--checkpoint",
                        checkpoint().string(), "--frames", frames, "--output", dump.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    std::vector<double> v;
    for (const auto& rec : dfbench::eval::read_predictions(dump)) v.push_back(rec.score);
    return v;
  };
  const auto a = scores("4", "a"), b = scores("4", "b"), c = scores("1", "c");
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST_F(CliTest, PredictConfigFilePrecedence) {
  const auto cfg = root() / "predict.ini";
  std::ofstream(cfg) << "frames = 1\nsplit = all\n";
  auto count_frames = [&](std::vector<std::string> extra) {
    const auto frames = root() / "cfg_frames.jsonl";
    std::vector<std::string> args{"predict", "--config", cfg.string(), "--manifest", manifest().string(),
                                  "--checkpoint", checkpoint().string(), "--output",
                                  (root() / "cfg.jsonl").string(), "--frame-dump", frames.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = dfb(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return lines(frames).size();
  };
  EXPECT_EQ(count_frames({}), 20u);
  EXPECT_EQ(count_frames({"--frames", "2"}), 40u);
}

TEST_F(CliTest, PredictMissingCheckpoint) {
  const auto r = dfb({"predict", "--manifest", manifest().string(), "--checkpoint",
                      (root() / "nope.ckpt").string(), "--output", (root() / "o.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nope.ckpt"), std::string::npos);
  EXPECT_TRUE(one_line(r.err));
}

TEST_F(CliTest, BenchmarkComparesDumps) {
  const auto a = root() / "bench_in" / "meso4.jsonl";
  ASSERT_EQ(dfb({"predict", "--manifest", manifest().string(), "--checkpoint", checkpoint().string(),
                 "--split", "all", "--output", a.string()}).code, 0);
  // A second "model" that scores by the opposite rule.
  auto recs = dfbench::eval::read_predictions(a);
  for (auto& r : recs) r.score = 1.0 - r.score;
  const auto b = root() / "bench_in" / "inverted.jsonl";
  dfbench::eval::write_predictions(recs, b);

  const auto out = root() / "bench_out";
  const auto r = dfb({"benchmark", "--dumps", a.string(), b.string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"meso4", "inverted"}) {
    for (const char* f : {"report.json", "metrics.txt", "roc.tsv"}) EXPECT_TRUE(fs::exists(out / name / f));
  }
  const auto table = lines(out / "comparison.tsv");
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[0], "Model\tAcc\tAcc Real\tAcc Fake\tAUC\tF1\tPrecision\tRecall");
  EXPECT_NE(r.out.find("# False negatives by method"), std::string::npos);
  EXPECT_NE(r.out.find("# Timing"), std::string::npos);

  const std::string first = slurp(out / "comparison.tsv");
  ASSERT_EQ(dfb({"benchmark", "--dumps", a.string(), b.string(), "--out", out.string()}).code, 0);
  EXPECT_EQ(slurp(out / "comparison.tsv"), first);
}

TEST_F(CliTest, BenchmarkSingleClassFails) {
  std::vector<dfbench::eval::PredictionRecord> recs(3);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].sample_id = "f" + std::to_string(i);
    recs[i].true_label = dfbench::data::Label::fake;
    recs[i].method = "retalking";
    recs[i].score = 0.3 * i;
  }
  const auto dump = root() / "single.jsonl";
  dfbench::eval::write_predictions(recs, dump);
  const auto r = dfb({"benchmark", "--dumps", dump.string(), "--out", (root() / "single_out").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("AUC"), std::string::npos);
}

TEST_F(CliTest, ReportSubcommand) {
  const auto dump = root() / "rep" / "meso4.jsonl";
  ASSERT_EQ(dfb({"predict", "--manifest", manifest().string(), "--checkpoint", checkpoint().string(),
                 "--split", "all", "--output", dump.string()}).code, 0);
  const auto r = dfb({"report", "--dump", dump.string(), "--out", (root() / "rep" / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("Acc\t", 0), 0u);
  const auto report = dfbench::eval::read_report(root() / "rep" / "out");
  EXPECT_EQ(report.model, "meso4");
  EXPECT_EQ(report.confusion.total(), 20u);
}

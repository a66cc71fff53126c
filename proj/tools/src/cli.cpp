#include "dfbench_cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dfbench/data/manifest.hpp"
#include "dfbench/errors.hpp"
#include "dfbench/eval/predict.hpp"
#include "dfbench/eval/report.hpp"
#include "dfbench/model/baselines.hpp"
#include "dfbench/train/checkpoint.hpp"
#include "dfbench/train/finetune.hpp"
#include "json.hpp"

namespace dfbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 0;
};

struct PreprocessArgs {
  std::string input, output, split = "80,15,5", map;
  bool anonymize = false;
};

struct TrainArgs {
  std::string manifest, model, preset = "desk", out = "runs", checkpoint_in;
  std::vector<std::size_t> epochs;
  double lr = 0.0;
  std::size_t batch_size = 0, frames = 15;
  double aug_rate = -1.0;
  bool no_augment = false;
};

struct PredictArgs {
  std::string manifest, checkpoint, checkpoint_b, combine = "avg", agg = "mean", split = "test";
  std::string output, frame_dump;
  std::size_t frames = 15;
  double threshold = 0.5;
};

struct BenchmarkArgs {
  std::vector<std::string> dumps, names, checkpoints;
  std::string manifest, out = "benchmark", agg = "mean";
  std::size_t frames = 15;
  double threshold = 0.5;
};

struct ReportArgs {
  std::string dump, out, name;
  double threshold = 0.5;
};

void print_stats(const data::DatasetStats& s, std::ostream& out) {
  out << "entries\t" << s.total << '\n';
  for (const auto& [k, v] : s.per_label) out << "label " << k << '\t' << v << '\n';
  for (const auto& [k, v] : s.per_method) out << "method " << k << '\t' << v << '\n';
  for (const auto& [k, v] : s.per_split) out << "split " << k << '\t' << v << '\n';
}

void cmd_preprocess(const PreprocessArgs& a, const Common& c, std::ostream& out) {
  data::Manifest m = data::scan_frame_tree(a.input);
  const auto spec = data::SplitSpec::parse(a.split, c.seed);
  m.entries = data::split_dataset(std::move(m.entries), spec);
  m.split = spec;
  if (a.anonymize) {
    auto anon = data::anonymize_names(std::move(m.entries), c.seed);
    m.entries = std::move(anon.entries);
    m.anonymized = true;
    const fs::path map_path =
        a.map.empty() ? fs::path(a.output).parent_path() / "anonymization_map.tsv" : fs::path(a.map);
    data::write_anonymization_map(anon.mapping, map_path);
    out << "map\t" << map_path.string() << '\n';
  }
  data::save_manifest(m, a.output);
  out << "manifest\t" << a.output << '\n';
  print_stats(data::compute_dataset_stats(m.entries), out);
}

void cmd_train(const TrainArgs& a, const Common& c, std::ostream& out) {
  const auto manifest = data::load_manifest(a.manifest);
  auto cfg = train::TrainConfig::defaults_for(a.model);
  cfg.preset = model::parse_scale_preset(a.preset);
  cfg.seed = c.seed;
  cfg.augmentation.seed = c.seed;
  if (!a.epochs.empty()) cfg.epochs = a.epochs;
  if (a.lr > 0.0) cfg.adam.lr = a.lr;
  if (a.batch_size > 0) cfg.batch_size = a.batch_size;
  if (a.aug_rate >= 0.0) {
    cfg.augment = true;
    cfg.augmentation.rate = a.aug_rate;
  }
  if (a.no_augment) cfg.augment = false;
  cfg.checkpoint_in = a.checkpoint_in;
  cfg.checkpoint_dir = a.out;
  cfg.log_path = fs::path(a.out) / (a.model + "_log.jsonl");

  const auto registry = model::DetectorRegistry::with_builtin();
  auto detector = registry.create(a.model, {cfg.preset, c.seed});
  const std::size_t size = detector->input_size();
  const auto train_set = train::load_split(manifest, data::Split::train, size, a.frames);
  const auto val_set = train::load_split(manifest, data::Split::val, size, a.frames);
  if (train_set.empty()) throw ConfigError("manifest has no train samples");
  if (val_set.empty()) throw ConfigError("manifest has no val samples");
  out << "training " << a.model << " on " << train_set.size() << " frames, validating on "
      << val_set.size() << '\n';

  const auto result = train::finetune(*detector, cfg, train_set, val_set, [&](const train::EpochLog& e) {
    out << "epoch " << e.epoch << "\ttrain_loss " << e.train_loss << "\tval_loss " << e.val_loss
        << "\tval_acc " << e.val_accuracy << '\n';
    return true;
  });
  for (const auto& p : result.saved) out << "checkpoint\t" << p.string() << '\n';
}

std::vector<eval::PredictionRecord> run_predict(const std::string& manifest_path,
                                                const std::string& ckpt_a, const std::string& ckpt_b,
                                                const std::string& combine,
                                                const eval::PredictOptions& opts,
                                                std::vector<eval::FrameScore>* frames) {
  const auto manifest = data::load_manifest(manifest_path);
  const auto registry = model::DetectorRegistry::with_builtin();
  if (!fs::exists(ckpt_a)) throw IoError("checkpoint not found: " + ckpt_a);
  auto a = train::restore_detector(train::load_checkpoint(ckpt_a), registry);
  if (ckpt_b.empty()) {
    return eval::predict_manifest(manifest, eval::detector_scorer(*a), a->input_size(), opts, frames);
  }
  if (!fs::exists(ckpt_b)) throw IoError("checkpoint not found: " + ckpt_b);
  auto b = train::restore_detector(train::load_checkpoint(ckpt_b), registry);
  if (a->input_size() != b->input_size()) {
    throw ConfigError("combined checkpoints disagree on input size");
  }
  const auto mode = model::parse_combine_mode(combine);
  return eval::predict_manifest(manifest, eval::combined_scorer(*a, *b, mode), a->input_size(), opts,
                                frames);
}

void cmd_predict(const PredictArgs& a, std::ostream& out) {
  eval::PredictOptions opts;
  opts.frames = a.frames;
  opts.aggregation = eval::parse_aggregation(a.agg);
  opts.threshold = a.threshold;
  opts.all_splits = a.split == "all";
  if (!opts.all_splits) opts.split = data::parse_split(a.split);
  std::vector<eval::FrameScore> frames;
  const auto records = run_predict(a.manifest, a.checkpoint, a.checkpoint_b, a.combine, opts,
                                   a.frame_dump.empty() ? nullptr : &frames);
  if (records.empty()) throw ConfigError("no manifest entries in split '" + a.split + "'");
  eval::write_predictions(records, a.output);
  if (!a.frame_dump.empty()) {
    std::ofstream f(a.frame_dump);
    if (!f) throw IoError("cannot write " + a.frame_dump);
    for (const auto& s : frames) {
      f << json{{"sample_id", s.sample_id}, {"frame", s.frame}, {"score", s.score}}.dump() << '\n';
    }
  }
  out << "predictions\t" << records.size() << '\t' << a.output << '\n';
}

std::string model_name_of(const fs::path& dump) { return dump.stem().string(); }

void cmd_benchmark(const BenchmarkArgs& a, std::ostream& out) {
  std::vector<std::pair<std::string, std::vector<eval::PredictionRecord>>> runs;
  if (!a.names.empty() && a.names.size() != a.dumps.size() + a.checkpoints.size()) {
    throw ConfigError("--names must give one name per dump/checkpoint");
  }
  std::size_t k = 0;
  auto name_for = [&](const std::string& fallback) {
    return a.names.empty() ? fallback : a.names[k];
  };
  for (const auto& d : a.dumps) {
    runs.emplace_back(name_for(model_name_of(d)), eval::read_predictions(d));
    ++k;
  }
  if (!a.checkpoints.empty()) {
    if (a.manifest.empty()) throw ConfigError("--checkpoints needs --manifest");
    eval::PredictOptions opts;
    opts.frames = a.frames;
    opts.aggregation = eval::parse_aggregation(a.agg);
    opts.threshold = a.threshold;
    for (const auto& c : a.checkpoints) {
      auto records = run_predict(a.manifest, c, "", "avg", opts, nullptr);
      const auto name = name_for(model_name_of(c));
      eval::write_predictions(records, fs::path(a.out) / (name + ".predictions.jsonl"));
      runs.emplace_back(name, std::move(records));
      ++k;
    }
  }
  if (runs.empty()) throw ConfigError("benchmark needs --dumps or --checkpoints");

  std::vector<eval::MetricsReport> reports;
  for (const auto& [name, records] : runs) {
    if (records.empty()) throw ConfigError("no predictions for " + name);
    auto report = eval::build_report(name, records, a.threshold);
    eval::emit_report(report, fs::path(a.out) / name);
    reports.push_back(std::move(report));
  }
  const std::string table = eval::comparison_table(reports);
  {
    std::ofstream f(fs::path(a.out) / "comparison.tsv");
    if (!f) throw IoError("cannot write " + (fs::path(a.out) / "comparison.tsv").string());
    f << table;
  }
  std::ostringstream sections;
  sections << "# False negatives by method\n";
  for (const auto& r : reports) {
    for (const auto& [method, n] : r.fn_by_method) sections << r.model << '\t' << method << '\t' << n << '\n';
  }
  sections << "# Timing (total_s, n, mean_s_per_sample)\n";
  for (const auto& r : reports) {
    sections << r.model << '\t' << r.timing.total_seconds << '\t' << r.timing.count << '\t'
             << r.timing.mean_seconds << '\n';
  }
  {
    std::ofstream f(fs::path(a.out) / "summary.txt");
    f << table << '\n' << sections.str();
  }
  out << table << '\n' << sections.str();
}

void cmd_report(const ReportArgs& a, std::ostream& out) {
  const auto records = eval::read_predictions(a.dump);
  const std::string name = a.name.empty() ? model_name_of(a.dump) : a.name;
  const auto report = eval::build_report(name, records, a.threshold);
  eval::emit_report(report, a.out);
  const auto& names = eval::headline_metric_names();
  const auto values = eval::headline_values(report);
  for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << '\t' << values[i] << '\n';
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

// Replaces "--config FILE" with the file's "key = value" lines as flags,
// skipping keys already given on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> kept;
  std::string file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 == args.size()) throw CLI::ArgumentMismatch("--config", 1, 0);
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (file.empty()) return kept;
  std::ifstream in(file);
  if (!in) throw CLI::ValidationError("--config", "cannot read " + file);
  const auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    s = s.substr(a, b - a + 1);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
    return s;
  };
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--config", file + " line " + std::to_string(n) + ": expected key = value");
    }
    std::string key = trim(body.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string value = trim(body.substr(eq + 1)), flag = "--" + key;
    if (key.empty() || has_flag(kept, flag)) continue;
    if (value == "true") {
      kept.push_back(flag);
    } else if (value != "false") {
      kept.push_back(flag);
      kept.push_back(value);
    }
  }
  return kept;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dfbench: deepfake detector fine-tuning and benchmarking"};
  app.require_subcommand(1);
  Common common;
  std::string config_path;
  app.add_option("--seed", common.seed, "Random seed (falls back to DFBENCH_SEED)")
      ->envname("DFBENCH_SEED");

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Random seed (falls back to DFBENCH_SEED)")
        ->envname("DFBENCH_SEED");
    sub->add_option("--config", config_path, "Flat key = value file; flags take precedence");
  };

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Scan a labelled frame tree into a split manifest");
  p->add_option("--input", pre.input, "root/real/<clip>/, root/fake/<method>/<clip>/")->required();
  p->add_option("--output", pre.output, "Manifest path")->required();
  p->add_option("--split", pre.split, "train,val,test fractions or percentages");
  p->add_flag("--anonymize", pre.anonymize, "Replace sample ids with random tokens");
  p->add_option("--map", pre.map, "Anonymization map path");
  add_seed(p);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Fine-tune a registered detector");
  t->add_option("--manifest", tr.manifest)->required()->check(CLI::ExistingFile);
  t->add_option("--model", tr.model)->required();
  t->add_option("--preset", tr.preset)->check(CLI::IsMember({"desk", "paper_tiny"}));
  t->add_option("--epochs", tr.epochs, "Epoch list, e.g. 4,5,8,10")->delimiter(',');
  t->add_option("--lr", tr.lr);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--frames", tr.frames, "Frames per clip")->check(CLI::PositiveNumber);
  t->add_option("--aug-rate", tr.aug_rate)->check(CLI::Range(0.0, 1.0));
  t->add_flag("--no-augment", tr.no_augment);
  t->add_option("--checkpoint-in", tr.checkpoint_in, "Pretrained weights")->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "Checkpoint and log directory");
  add_seed(t);

  PredictArgs pr;
  auto* d = app.add_subcommand("predict", "Score manifest clips with a checkpoint");
  d->add_option("--manifest", pr.manifest)->required()->check(CLI::ExistingFile);
  d->add_option("--checkpoint", pr.checkpoint)->required();
  d->add_option("--checkpoint-b", pr.checkpoint_b, "Second network to combine with");
  d->add_option("--combine", pr.combine)->check(CLI::IsMember({"avg", "max", "a_only", "b_only"}));
  d->add_option("--frames", pr.frames)->check(CLI::PositiveNumber);
  d->add_option("--agg", pr.agg)->check(CLI::IsMember({"mean", "max", "majority"}));
  d->add_option("--threshold", pr.threshold)->check(CLI::Range(0.0, 1.0));
  d->add_option("--split", pr.split)->check(CLI::IsMember({"train", "val", "test", "all"}));
  d->add_option("--output", pr.output, "Prediction dump (JSONL)")->required();
  d->add_option("--frame-dump", pr.frame_dump, "Per-frame scores (JSONL)");
  add_seed(d);

  BenchmarkArgs be;
  auto* b = app.add_subcommand("benchmark", "Compare models from prediction dumps or checkpoints");
  b->add_option("--dumps", be.dumps)->check(CLI::ExistingFile);
  b->add_option("--names", be.names);
  b->add_option("--checkpoints", be.checkpoints)->check(CLI::ExistingFile);
  b->add_option("--manifest", be.manifest)->check(CLI::ExistingFile);
  b->add_option("--frames", be.frames)->check(CLI::PositiveNumber);
  b->add_option("--agg", be.agg)->check(CLI::IsMember({"mean", "max", "majority"}));
  b->add_option("--threshold", be.threshold)->check(CLI::Range(0.0, 1.0));
  b->add_option("--out", be.out);
  add_seed(b);

  ReportArgs re;
  auto* r = app.add_subcommand("report", "Metrics report for one prediction dump");
  r->add_option("--dump", re.dump)->required()->check(CLI::ExistingFile);
  r->add_option("--out", re.out)->required();
  r->add_option("--name", re.name);
  r->add_option("--threshold", re.threshold)->check(CLI::Range(0.0, 1.0));
  add_seed(r);

  try {
    const auto expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "dfbench: usage error: " << msg << '\n';
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*p) cmd_preprocess(pre, common, out);
    if (*t) cmd_train(tr, common, out);
    if (*d) cmd_predict(pr, out);
    if (*b) cmd_benchmark(be, out);
    if (*r) cmd_report(re, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "dfbench: error: " << msg << '\n';
    return 1;
  }
  return 0;
}

}  // namespace dfbench::cli

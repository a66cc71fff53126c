#include "dfbench/train/finetune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "dfbench/data/image.hpp"
#include "dfbench/random.hpp"
#include "../fs_util.hpp"

namespace dfbench::train {

namespace fs = std::filesystem;
using nlohmann::json;

Dataset load_split(const data::Manifest& manifest, data::Split split, std::size_t image_size,
                   std::size_t frames_per_clip) {
  Dataset out;
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    for (auto i : data::sample_frame_indices(e.frames.size(), frames_per_clip)) {
      out.push_back({data::resize_normalize(manifest.frame_path(e, i), image_size),
                     data::label_index(e.label), e.sample_id, e.method});
    }
  }
  return out;
}

TrainConfig TrainConfig::defaults_for(const std::string& model) {
  TrainConfig c;
  c.model = model;
  if (model == "genconvit_ae") {
    c.adam.lr = 1e-4;
    c.batch_size = 32;
  } else if (model == "genconvit_vae") {
    c.adam.lr = 1e-4;
    c.batch_size = 16;
  } else {
    c.adam.lr = 2e-4;
    c.batch_size = 16;
    c.augment = false;
  }
  return c;
}

std::size_t TrainConfig::total_epochs() const {
  return epochs.empty() ? 0 : *std::max_element(epochs.begin(), epochs.end());
}

void TrainConfig::validate() const {
  if (model.empty()) throw ConfigError("training config needs a model name");
  adam.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs.empty()) throw ConfigError("epochs must list at least one value");
  for (auto e : epochs) {
    if (e == 0) throw ConfigError("epochs must be >= 1");
  }
  if (augment) augmentation.validate();
}

json TrainConfig::to_json() const {
  json aug = json::array();
  for (auto t : augmentation.enabled) aug.push_back(data::to_string(t));
  return {{"model", model},
          {"preset", model::to_string(preset)},
          {"learning_rate", adam.lr},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"eps", adam.eps},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"augment", augment},
          {"augmentation_rate", augmentation.rate},
          {"augmentation_transforms", aug},
          {"seed", seed}};
}

Tensor stack_images(const Dataset& data, const std::vector<std::size_t>& order, std::size_t first,
                    std::size_t last) {
  const Shape& s = data.at(order[first]).image.shape();
  Shape shape{last - first};
  shape.insert(shape.end(), s.begin(), s.end());
  Tensor out(shape);
  const std::size_t chunk = numel(s);
  for (std::size_t i = first; i < last; ++i) {
    const Tensor& img = data[order[i]].image;
    if (img.shape() != s) throw ShapeError("dataset images differ in shape");
    std::copy(img.values().begin(), img.values().end(), out.data() + (i - first) * chunk);
  }
  return out;
}

namespace {

std::vector<int> batch_labels(const Dataset& data, const std::vector<std::size_t>& order,
                              std::size_t first, std::size_t last) {
  std::vector<int> out;
  for (std::size_t i = first; i < last; ++i) out.push_back(data[order[i]].label);
  return out;
}

std::size_t count_correct(const Tensor& logits, const std::vector<int>& labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int pred = logits[2 * i + 1] > logits[2 * i] ? 1 : 0;
    correct += pred == labels[i];
  }
  return correct;
}

}  // namespace

EvalResult evaluate_epoch(model::Detector& detector, const Dataset& data, std::size_t batch_size) {
  if (data.empty()) throw ConfigError("evaluate_epoch: empty dataset");
  if (batch_size == 0) throw ConfigError("evaluate_epoch: batch_size must be >= 1");
  const bool was_training = detector.training();
  detector.set_training(false);
  nn::NoGradGuard no_grad;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t first = 0; first < data.size(); first += batch_size) {
    const std::size_t last = std::min(first + batch_size, data.size());
    const Tensor images = stack_images(data, order, first, last);
    const auto labels = batch_labels(data, order, first, last);
    const auto out = detector.forward(nn::Var(images));
    const auto loss = detector.loss(out, labels, images);
    loss_sum += loss.breakdown.value * static_cast<double>(last - first);
    correct += count_correct(out.logits.value(), labels);
  }
  detector.set_training(was_training);
  const double n = static_cast<double>(data.size());
  return {loss_sum / n, static_cast<double>(correct) / n, data.size()};
}

TrainResult finetune(model::Detector& detector, const TrainConfig& cfg, const Dataset& train,
                     const Dataset& val, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw ConfigError("finetune: empty training set");
  if (val.empty()) throw ConfigError("finetune: empty validation set");
  if (!cfg.checkpoint_in.empty()) load_pretrained(detector, cfg.checkpoint_in);

  Adam adam(detector.named_parameters(), cfg.adam);
  std::ofstream log;
  if (!cfg.log_path.empty()) {
    detail::ensure_parent_dir(cfg.log_path);
    log.open(cfg.log_path, std::ios::app);
    if (!log) throw IoError("cannot open epoch log " + cfg.log_path.string());
  }

  auto make_checkpoint = [&](std::size_t epoch, const std::vector<EpochLog>& history) {
    Checkpoint c = snapshot(detector, cfg.preset, cfg.seed);
    c.epoch = epoch;
    c.config["train"] = cfg.to_json();
    c.history = history;
    c.optimizer = adam.state();
    c.optimizer_step = adam.step_count();
    return c;
  };

  TrainResult result;
  std::vector<EpochLog> history;
  Checkpoint last_good = make_checkpoint(0, history);
  std::vector<std::size_t> order(train.size());
  const std::size_t total = cfg.total_epochs();

  for (std::size_t epoch = 1; epoch <= total; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    detector.set_training(true);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, {0x5f1ULL, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t first = 0; first < train.size(); first += cfg.batch_size) {
      const std::size_t last = std::min(first + cfg.batch_size, train.size());
      Tensor images = stack_images(train, order, first, last);
      if (cfg.augment && cfg.augmentation.rate > 0.0) {
        const std::size_t chunk = images.size() / (last - first);
        const Shape& s = train[order[first]].image.shape();
        for (std::size_t i = first; i < last; ++i) {
          const auto seed = derive_seed(cfg.seed, {0xa06ULL, epoch, order[i]});
          const Tensor aug = data::augment(train[order[i]].image, cfg.augmentation, seed);
          if (aug.shape() != s) continue;
          std::copy(aug.values().begin(), aug.values().end(), images.data() + (i - first) * chunk);
        }
      }
      const auto labels = batch_labels(train, order, first, last);
      const auto out = detector.forward(nn::Var(images));
      const auto loss = detector.loss(out, labels, images);
      const double value = loss.breakdown.value;
      if (!std::isfinite(value) || value > 1e6) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                                   " (loss " + std::to_string(value) + ")",
                               last_good);
      }
      adam.zero_grad();
      loss.total.backward();
      adam.step();
      loss_sum += value * static_cast<double>(last - first);
      correct += count_correct(out.logits.value(), labels);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(train.size());
    entry.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    if (cfg.eval_train) {
      const auto tr = evaluate_epoch(detector, train, cfg.batch_size);
      entry.train_accuracy = tr.accuracy;
    }
    const auto v = evaluate_epoch(detector, val, cfg.batch_size);
    entry.val_loss = v.loss;
    entry.val_accuracy = v.accuracy;
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(entry);
    if (log) log << entry.to_json().dump() << '\n' << std::flush;

    last_good = make_checkpoint(epoch, history);
    const bool listed = std::find(cfg.epochs.begin(), cfg.epochs.end(), epoch) != cfg.epochs.end();
    if (listed && !cfg.checkpoint_dir.empty()) {
      const fs::path p = cfg.checkpoint_dir / (cfg.model + "_epoch" + std::to_string(epoch) + ".ckpt");
      save_checkpoint(last_good, p);
      result.saved.push_back(p);
    }
    if (on_epoch && !on_epoch(entry)) break;
  }
  detector.set_training(false);
  result.final = std::move(last_good);
  return result;
}

}  // namespace dfbench::train

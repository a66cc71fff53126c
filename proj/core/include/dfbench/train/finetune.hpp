#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dfbench/data/augment.hpp"
#include "dfbench/data/manifest.hpp"
#include "dfbench/model/detector.hpp"
#include "dfbench/train/adam.hpp"
#include "dfbench/train/checkpoint.hpp"

namespace dfbench::train {

struct Sample {
  Tensor image;  // [C, S, S] in [0, 1]
  int label = model::kRealLabel;
  std::string sample_id;
  std::string method;
};

using Dataset = std::vector<Sample>;

// One sample per sampled frame (at most frames_per_clip per entry) of the
// entries assigned to `split`, resized to image_size.
Dataset load_split(const data::Manifest& manifest, data::Split split, std::size_t image_size,
                   std::size_t frames_per_clip);

struct TrainConfig {
  std::string model;
  model::ScalePreset preset = model::ScalePreset::desk;
  AdamOptions adam;  // adam.lr is the learning rate
  std::size_t batch_size = 16;
  // Training runs to the largest value; a checkpoint is written after each
  // listed epoch.
  std::vector<std::size_t> epochs = {1};
  data::AugmentationConfig augmentation;
  bool augment = true;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_in;   // optional pretrained weights
  std::filesystem::path checkpoint_dir;  // empty: keep checkpoints in memory only
  std::filesystem::path log_path;        // empty: no JSONL epoch log
  // Also score the training set in eval mode after every epoch.
  bool eval_train = false;

  // lr 1e-4 and batch 32 (genconvit_ae) or 16 (genconvit_vae) with 90%
  // augmentation; lr 2e-4 and batch 16 for the baselines.
  static TrainConfig defaults_for(const std::string& model);

  std::size_t total_epochs() const;
  void validate() const;
  nlohmann::json to_json() const;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

// Mean loss and argmax accuracy in eval mode without touching the weights;
// the previous training flag is restored. ConfigError on an empty set.
EvalResult evaluate_epoch(model::Detector& detector, const Dataset& data, std::size_t batch_size = 16);

struct TrainingDiverged : NumericError {
  TrainingDiverged(const std::string& what, Checkpoint last_good)
      : NumericError(what), last_good(std::move(last_good)) {}
  Checkpoint last_good;
};

struct TrainResult {
  Checkpoint final;
  std::vector<std::filesystem::path> saved;
};

// Return false to stop after the current epoch.
using EpochCallback = std::function<bool(const EpochLog&)>;

// Adam over per-epoch reshuffled mini-batches. Throws TrainingDiverged
// (carrying the last finished epoch's checkpoint) when a batch loss is
// non-finite or above 1e6.
TrainResult finetune(model::Detector& detector, const TrainConfig& cfg, const Dataset& train,
                     const Dataset& val, const EpochCallback& on_epoch = {});

// Stacks samples [first, last) of `order` into a batch tensor and label list.
Tensor stack_images(const Dataset& data, const std::vector<std::size_t>& order, std::size_t first,
                    std::size_t last);

}  // namespace dfbench::train

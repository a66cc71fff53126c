#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "dfbench/errors.hpp"
#include "dfbench/model/baselines.hpp"
#include "dfbench/nn/layers.hpp"
#include "json.hpp"

namespace dfbench::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointVersionError : FormatError {
  using FormatError::FormatError;
};
struct CheckpointCorruptError : FormatError {
  using FormatError::FormatError;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
  static EpochLog from_json(const nlohmann::json& j);
};

struct Checkpoint {
  std::string model;
  model::ScalePreset preset = model::ScalePreset::desk;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  nlohmann::json config;  // model config plus the training config
  std::vector<EpochLog> history;
  nn::StateDict weights;
  nn::StateDict optimizer;
  std::uint64_t optimizer_step = 0;
};

// Layout: "DFBCKPT\0", u32 version, u64 header size, JSON header, raw
// little-endian doubles, u64 FNV-1a of everything before it. Written to a
// temporary file and renamed.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// IoError when unreadable, CheckpointVersionError on a foreign version,
// CheckpointCorruptError on bad magic, truncation or checksum mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Snapshot of a detector's weights (no optimizer state).
Checkpoint snapshot(const model::Detector& detector, model::ScalePreset preset, std::uint64_t seed);

// Builds the checkpoint's model through the registry and loads its weights.
std::unique_ptr<model::Detector> restore_detector(const Checkpoint& ckpt,
                                                  const model::DetectorRegistry& registry);

// Pretrained-weight hook: copies the weights stored at `path` into `detector`.
// FormatError when the checkpoint belongs to another model or shapes differ.
void load_pretrained(model::Detector& detector, const std::filesystem::path& path);

}  // namespace dfbench::train

#include "dfbench/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "../fs_util.hpp"

namespace dfbench::train {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little endian");

namespace {

constexpr char kMagic[8] = {'D', 'F', 'B', 'C', 'K', 'P', 'T', '\0'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <typename T>
T get(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw CheckpointCorruptError("checkpoint truncated");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void index_group(const nn::StateDict& group, const char* tag, json& index, std::size_t& offset) {
  for (const auto& [name, t] : group) {
    index.push_back({{"group", tag}, {"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
}

}  // namespace

json EpochLog::to_json() const {
  return {{"epoch", epoch},         {"train_loss", train_loss}, {"train_acc", train_accuracy},
          {"val_loss", val_loss},   {"val_acc", val_accuracy},  {"wall_seconds", wall_seconds}};
}

EpochLog EpochLog::from_json(const json& j) {
  EpochLog e;
  e.epoch = j.at("epoch");
  e.train_loss = j.at("train_loss");
  e.train_accuracy = j.value("train_acc", 0.0);
  e.val_loss = j.at("val_loss");
  e.val_accuracy = j.at("val_acc");
  e.wall_seconds = j.value("wall_seconds", 0.0);
  return e;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  json header;
  header["model"] = ckpt.model;
  header["preset"] = model::to_string(ckpt.preset);
  header["seed"] = ckpt.seed;
  header["epoch"] = ckpt.epoch;
  header["config"] = ckpt.config;
  header["optimizer_step"] = ckpt.optimizer_step;
  header["history"] = json::array();
  for (const auto& e : ckpt.history) header["history"].push_back(e.to_json());
  json index = json::array();
  std::size_t offset = 0;
  index_group(ckpt.weights, "weights", index, offset);
  index_group(ckpt.optimizer, "optimizer", index, offset);
  header["tensors"] = index;
  const std::string text = header.dump();

  std::string buf(kMagic, sizeof kMagic);
  put<std::uint32_t>(buf, kCheckpointVersion);
  put<std::uint64_t>(buf, text.size());
  buf += text;
  buf.reserve(buf.size() + offset * sizeof(double) + 8);
  for (const auto* group : {&ckpt.weights, &ckpt.optimizer}) {
    for (const auto& [_, t] : *group) {
      buf.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
    }
  }
  put<std::uint64_t>(buf, fnv1a(buf.data(), buf.size()));

  detail::ensure_parent_dir(path);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  detail::replace_file(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = " (" + path.string() + ")";

  if (buf.size() < sizeof kMagic || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointCorruptError("not a dfbench checkpoint" + where);
  }
  std::size_t pos = sizeof kMagic;
  const auto version = get<std::uint32_t>(buf, pos);
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint version " + std::to_string(version) +
                                 " unsupported (expected " + std::to_string(kCheckpointVersion) + ")" + where);
  }
  if (buf.size() < pos + 16) throw CheckpointCorruptError("checkpoint truncated" + where);
  std::size_t tail = buf.size() - 8;
  const auto stored = get<std::uint64_t>(buf, tail);
  if (stored != fnv1a(buf.data(), buf.size() - 8)) {
    throw CheckpointCorruptError("checkpoint checksum mismatch" + where);
  }
  const auto header_len = get<std::uint64_t>(buf, pos);
  if (pos + header_len > buf.size() - 8) throw CheckpointCorruptError("checkpoint truncated" + where);
  json header;
  try {
    header = json::parse(buf.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw CheckpointCorruptError(std::string("bad checkpoint header: ") + e.what() + where);
  }
  pos += header_len;
  const std::size_t payload = pos;
  const std::size_t payload_doubles = (buf.size() - 8 - payload) / sizeof(double);

  Checkpoint c;
  try {
    c.model = header.at("model");
    c.preset = model::parse_scale_preset(header.at("preset"));
    c.seed = header.at("seed");
    c.epoch = header.at("epoch");
    c.config = header.at("config");
    c.optimizer_step = header.at("optimizer_step");
    for (const auto& e : header.at("history")) c.history.push_back(EpochLog::from_json(e));
    for (const auto& t : header.at("tensors")) {
      const Shape shape = t.at("shape").get<Shape>();
      const std::size_t off = t.at("offset");
      const std::size_t n = numel(shape);
      if (off + n > payload_doubles) throw CheckpointCorruptError("tensor past end of payload" + where);
      std::vector<double> values(n);
      std::memcpy(values.data(), buf.data() + payload + off * sizeof(double), n * sizeof(double));
      auto& group = t.at("group") == "weights" ? c.weights : c.optimizer;
      group.emplace(t.at("name").get<std::string>(), Tensor(shape, std::move(values)));
    }
  } catch (const json::exception& e) {
    throw CheckpointCorruptError(std::string("bad checkpoint header: ") + e.what() + where);
  }
  return c;
}

Checkpoint snapshot(const model::Detector& detector, model::ScalePreset preset, std::uint64_t seed) {
  Checkpoint c;
  c.model = detector.name();
  c.preset = preset;
  c.seed = seed;
  c.config = {{"model", detector.config()}};
  c.weights = nn::state_dict(detector);
  return c;
}

std::unique_ptr<model::Detector> restore_detector(const Checkpoint& ckpt,
                                                  const model::DetectorRegistry& registry) {
  auto detector = registry.create(ckpt.model, {ckpt.preset, ckpt.seed});
  nn::load_state_dict(*detector, ckpt.weights);
  return detector;
}

void load_pretrained(model::Detector& detector, const fs::path& path) {
  const Checkpoint c = load_checkpoint(path);
  if (c.model != detector.name()) {
    throw FormatError("checkpoint " + path.string() + " holds '" + c.model + "', not '" +
                      detector.name() + "'");
  }
  nn::load_state_dict(detector, c.weights);
}

}  // namespace dfbench::train

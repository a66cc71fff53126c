#include "dfbench/data/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dfbench/errors.hpp"
#include "../fs_util.hpp"
#include "json.hpp"

namespace dfbench::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Label label) { return label == Label::fake ? "fake" : "real"; }

std::string to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
    case Split::unassigned:
      break;
  }
  return "unassigned";
}

Label parse_label(const std::string& text) {
  if (text == "real") return Label::real;
  if (text == "fake") return Label::fake;
  throw FormatError("unknown label '" + text + "' (expected real or fake)");
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  if (text == "unassigned" || text.empty()) return Split::unassigned;
  throw FormatError("unknown split '" + text + "'");
}

void ManifestEntry::validate() const {
  if (sample_id.empty()) throw FormatError("manifest entry without sample_id");
  if (frames.empty()) throw FormatError("manifest entry '" + sample_id + "' has no frames");
  if (method.empty()) throw FormatError("manifest entry '" + sample_id + "' has no method");
  if (label == Label::real && method != kOriginalMethod) {
    throw FormatError("real entry '" + sample_id + "' must have method 'original', got '" +
                      method + "'");
  }
}

void SplitSpec::validate() const {
  if (train < 0 || val < 0 || test < 0) throw ConfigError("split fractions must be >= 0");
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

SplitSpec SplitSpec::parse(const std::string& text, std::uint64_t seed) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad split fraction '" + item + "' in '" + text + "'");
    }
  }
  if (parts.size() != 3) throw ConfigError("split needs three fractions, got '" + text + "'");
  double total = parts[0] + parts[1] + parts[2];
  // Percentages are accepted when they add up to 100.
  if (std::abs(total - 100.0) < 1e-6) {
    for (auto& p : parts) p /= 100.0;
  }
  SplitSpec spec{parts[0], parts[1], parts[2], seed};
  spec.validate();
  return spec;
}

fs::path Manifest::frame_path(const ManifestEntry& entry, std::size_t i) const {
  const fs::path p = entry.frames.at(i);
  return p.is_absolute() ? p : root / p;
}

namespace {

json split_to_json(const SplitSpec& s) {
  return {{"train", s.train}, {"val", s.val}, {"test", s.test}, {"seed", s.seed}};
}

ManifestEntry entry_from_json(const json& j) {
  ManifestEntry e;
  e.sample_id = j.at("sample_id").get<std::string>();
  e.frames = j.at("frames").get<std::vector<std::string>>();
  e.label = parse_label(j.at("label").get<std::string>());
  e.method = j.value("method", e.label == Label::real ? kOriginalMethod : std::string());
  e.split = parse_split(j.value("split", std::string("unassigned")));
  e.validate();
  return e;
}

}  // namespace

Manifest parse_manifest(std::istream& in, const fs::path& base_dir) {
  Manifest m;
  m.root = base_dir;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("dfbench_manifest")) {
        if (!m.entries.empty()) throw FormatError("header must precede records");
        if (j.at("dfbench_manifest").get<int>() != 1) throw FormatError("unsupported manifest version");
        const fs::path root = j.value("root", std::string("."));
        m.root = root.is_absolute() ? root : base_dir / root;
        if (j.contains("split") && !j.at("split").is_null()) {
          const auto& s = j.at("split");
          m.split = SplitSpec{s.at("train"), s.at("val"), s.at("test"), s.value("seed", 0ULL)};
        }
        m.anonymized = j.value("anonymized", false);
        continue;
      }
      ManifestEntry e = entry_from_json(j);
      if (!seen.insert(e.sample_id).second) {
        throw FormatError("duplicate sample_id '" + e.sample_id + "'");
      }
      m.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + ex.what());
    } catch (const Error& ex) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return m;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  detail::ensure_parent_dir(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  // Store the root relative to the manifest's own directory when possible.
  const fs::path dir = fs::absolute(path).parent_path();
  fs::path root = fs::absolute(manifest.root).lexically_normal();
  const fs::path rel = root.lexically_relative(dir);
  json header{{"dfbench_manifest", 1},
              {"root", rel.empty() ? root.string() : rel.string()},
              {"anonymized", manifest.anonymized}};
  header["split"] = manifest.split ? split_to_json(*manifest.split) : json(nullptr);
  out << header.dump() << '\n';
  for (const auto& e : manifest.entries) {
    json j{{"sample_id", e.sample_id},
           {"frames", e.frames},
           {"label", to_string(e.label)},
           {"method", e.method},
           {"split", to_string(e.split)}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing manifest " + path.string());
}

Anonymized anonymize_names(std::vector<ManifestEntry> entries, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::unordered_set<std::string> used;
  Anonymized out;
  out.mapping.reserve(entries.size());
  for (auto& e : entries) {
    std::string token;
    do {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
      token = buf;
    } while (!used.insert(token).second);
    out.mapping.emplace_back(token, e.sample_id);
    e.sample_id = token;
  }
  out.entries = std::move(entries);
  return out;
}

void write_anonymization_map(const std::vector<std::pair<std::string, std::string>>& mapping,
                             const fs::path& path) {
  detail::ensure_parent_dir(path);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp.string());
    for (const auto& [token, original] : mapping) out << token << '\t' << original << '\n';
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  detail::replace_file(tmp, path);
}

std::vector<std::pair<std::string, std::string>> read_anonymization_map(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": missing tab");
    }
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

DatasetStats compute_dataset_stats(const std::vector<ManifestEntry>& entries) {
  DatasetStats s;
  s.per_label = {{"real", 0}, {"fake", 0}};
  s.per_split = {{"train", 0}, {"val", 0}, {"test", 0}, {"unassigned", 0}};
  for (const auto& e : entries) {
    ++s.total;
    ++s.per_label[to_string(e.label)];
    ++s.per_method[e.method];
    ++s.per_split[to_string(e.split)];
  }
  return s;
}

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<fs::path> sorted_dirs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& d : fs::directory_iterator(dir)) {
    if (d.is_directory()) out.push_back(d.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Manifest scan_frame_tree(const fs::path& root, const FaceCropAdapter& adapter) {
  if (!fs::is_directory(root)) throw IoError("input directory " + root.string() + " not found");
  Manifest m;
  m.root = fs::absolute(root);

  auto add_clip = [&](const fs::path& clip_dir, Label label, const std::string& method,
                      const std::string& id) {
    std::vector<fs::path> frames;
    for (const auto& f : fs::directory_iterator(clip_dir)) {
      if (f.is_regular_file() && is_image_file(f.path())) frames.push_back(f.path());
    }
    if (frames.empty()) return;
    std::sort(frames.begin(), frames.end());
    ManifestEntry e;
    e.sample_id = id;
    e.label = label;
    e.method = method;
    for (const auto& f : frames) {
      const fs::path p = adapter ? adapter(f) : f;
      e.frames.push_back(fs::absolute(p).lexically_relative(m.root).string());
    }
    m.entries.push_back(std::move(e));
  };

  for (const auto& clip : sorted_dirs(root / "real")) {
    add_clip(clip, Label::real, kOriginalMethod, "real_" + clip.filename().string());
  }
  for (const auto& method_dir : sorted_dirs(root / "fake")) {
    const std::string method = method_dir.filename().string();
    for (const auto& clip : sorted_dirs(method_dir)) {
      add_clip(clip, Label::fake, method, "fake_" + method + "_" + clip.filename().string());
    }
  }
  if (m.entries.empty()) throw IoError("no labelled clips found under " + root.string());
  return m;
}

}  // namespace dfbench::data

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dfbench::data {

enum class Label { real, fake };
enum class Split { train, val, test, unassigned };

std::string to_string(Label label);
std::string to_string(Split split);
Label parse_label(const std::string& text);  // FormatError on anything but real/fake
Split parse_split(const std::string& text);
inline int label_index(Label label) { return label == Label::fake ? 1 : 0; }

// Method tag carried by every real sample.
inline const std::string kOriginalMethod = "original";

struct ManifestEntry {
  std::string sample_id;
  std::vector<std::string> frames;  // relative to the manifest root
  Label label = Label::real;
  std::string method = kOriginalMethod;
  Split split = Split::unassigned;

  // Throws FormatError when frames are empty, the id is empty, or a real
  // entry carries a method other than "original".
  void validate() const;
};

struct SplitSpec {
  double train = 0.8;
  double val = 0.15;
  double test = 0.05;
  std::uint64_t seed = 0;

  // Fractions must be >= 0 and sum to 1 within 1e-9.
  void validate() const;
  // "80,15,5" (percent) or "0.8,0.15,0.05".
  static SplitSpec parse(const std::string& text, std::uint64_t seed = 0);
};

struct Manifest {
  std::filesystem::path root;  // frame paths resolve against this
  std::optional<SplitSpec> split;
  bool anonymized = false;
  std::vector<ManifestEntry> entries;

  std::filesystem::path frame_path(const ManifestEntry& entry, std::size_t i) const;
};

// One JSON object per line. An optional first line {"dfbench_manifest": 1,
// "root": ..., "split": ...} declares the root (relative roots resolve against
// the manifest's directory); without it the root is that directory.
// Throws FormatError with the 1-based line number on bad records, on duplicate
// sample ids and on unknown labels.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Stratified by label: per-split totals are round(fraction * N) with the
// remainder going to train, and each label's share follows a largest-remainder
// allocation. Throws ConfigError if any entry is already assigned.
std::vector<ManifestEntry> split_dataset(std::vector<ManifestEntry> entries, const SplitSpec& spec);

// Uniformly spaced, strictly increasing indices; all indices when count <= k.
std::vector<std::size_t> sample_frame_indices(std::size_t count, std::size_t k);
std::vector<std::string> sample_frames(const ManifestEntry& entry, std::size_t k);

struct Anonymized {
  std::vector<ManifestEntry> entries;
  std::vector<std::pair<std::string, std::string>> mapping;  // (token, original id)
};

// Replaces sample ids by unique 16-hex-digit tokens drawn from `seed`.
Anonymized anonymize_names(std::vector<ManifestEntry> entries, std::uint64_t seed);
// Tab-separated "token<TAB>original_id" lines, written to a temporary file and
// renamed into place.
void write_anonymization_map(const std::vector<std::pair<std::string, std::string>>& mapping,
                             const std::filesystem::path& path);
std::vector<std::pair<std::string, std::string>> read_anonymization_map(
    const std::filesystem::path& path);

struct DatasetStats {
  std::size_t total = 0;
  std::map<std::string, std::size_t> per_label;
  std::map<std::string, std::size_t> per_method;
  std::map<std::string, std::size_t> per_split;
};

DatasetStats compute_dataset_stats(const std::vector<ManifestEntry>& entries);

// Hook for an external face detector: maps a raw frame to a face-crop path.
using FaceCropAdapter = std::function<std::filesystem::path(const std::filesystem::path&)>;

// Scans root/real/<clip>/<frames> and root/fake/<method>/<clip>/<frames>
// (frames sorted by file name; .png/.jpg/.jpeg/.bmp). Sample ids are
// "real_<clip>" and "fake_<method>_<clip>". The adapter, if given, is applied
// to each frame path and its result stored instead.
Manifest scan_frame_tree(const std::filesystem::path& root, const FaceCropAdapter& adapter = {});

}  // namespace dfbench::data

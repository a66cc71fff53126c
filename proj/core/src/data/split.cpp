#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "dfbench/data/manifest.hpp"
#include "dfbench/errors.hpp"
#include "dfbench/random.hpp"

namespace dfbench::data {

std::vector<ManifestEntry> split_dataset(std::vector<ManifestEntry> entries, const SplitSpec& spec) {
  spec.validate();
  for (const auto& e : entries) {
    if (e.split != Split::unassigned) {
      throw ConfigError("split_dataset: entry '" + e.sample_id + "' already assigned to " +
                        to_string(e.split));
    }
  }
  const std::size_t n = entries.size();
  if (n == 0) return entries;

  std::array<std::size_t, 3> col{};
  col[1] = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n)));
  col[2] = static_cast<std::size_t>(std::llround(spec.test * static_cast<double>(n)));
  if (col[1] + col[2] > n) col[2] = n - col[1];
  col[0] = n - col[1] - col[2];

  std::array<std::vector<std::size_t>, 2> by_label;
  for (std::size_t i = 0; i < n; ++i) by_label[label_index(entries[i].label)].push_back(i);

  // Floor of the proportional share, then hand out the leftovers by largest
  // fractional remainder while respecting both label and split totals.
  std::array<std::array<std::size_t, 3>, 2> alloc{};
  std::array<std::array<double, 3>, 2> rem{};
  std::array<std::size_t, 2> row_left{};
  std::array<std::size_t, 3> col_left = col;
  for (int l = 0; l < 2; ++l) {
    const double nl = static_cast<double>(by_label[l].size());
    std::size_t used = 0;
    for (int s = 0; s < 3; ++s) {
      const double ideal = nl * static_cast<double>(col[s]) / static_cast<double>(n);
      alloc[l][s] = static_cast<std::size_t>(std::floor(ideal + 1e-12));
      rem[l][s] = ideal - static_cast<double>(alloc[l][s]);
      used += alloc[l][s];
      col_left[s] -= alloc[l][s];
    }
    row_left[l] = by_label[l].size() - used;
  }
  while (row_left[0] + row_left[1] > 0) {
    int best_l = -1, best_s = -1;
    double best = -2.0;
    for (int l = 0; l < 2; ++l) {
      for (int s = 0; s < 3; ++s) {
        if (row_left[l] == 0 || col_left[s] == 0) continue;
        // Ties favour train, then val.
        if (rem[l][s] > best + 1e-12) {
          best = rem[l][s];
          best_l = l;
          best_s = s;
        }
      }
    }
    if (best_l < 0) throw Error("split_dataset: allocation failed");
    ++alloc[best_l][best_s];
    --row_left[best_l];
    --col_left[best_s];
    rem[best_l][best_s] = -1.0;
  }

  for (int l = 0; l < 2; ++l) {
    auto& idx = by_label[l];
    std::mt19937_64 rng(derive_seed(spec.seed, {0x5b17ULL, static_cast<std::uint64_t>(l)}));
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < alloc[l][s]; ++k) {
        entries[idx[pos++]].split = static_cast<Split>(s);
      }
    }
  }
  return entries;
}

std::vector<std::size_t> sample_frame_indices(std::size_t count, std::size_t k) {
  std::vector<std::size_t> out;
  if (count == 0 || k == 0) return out;
  if (count <= k) {
    out.resize(count);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  if (k == 1) return {(count - 1) / 2};
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double pos = static_cast<double>(j) * static_cast<double>(count - 1) /
                       static_cast<double>(k - 1);
    out.push_back(static_cast<std::size_t>(std::llround(pos)));
  }
  return out;
}

std::vector<std::string> sample_frames(const ManifestEntry& entry, std::size_t k) {
  std::vector<std::string> out;
  for (auto i : sample_frame_indices(entry.frames.size(), k)) out.push_back(entry.frames[i]);
  return out;
}

}  // namespace dfbench::data

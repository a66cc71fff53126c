#pragma once

#include <filesystem>
#include <system_error>

#include "dfbench/errors.hpp"

namespace dfbench::detail {

// Creates the parent directory of `path` if needed; IoError names the path.
inline void ensure_parent_dir(const std::filesystem::path& path) {
  if (!path.has_parent_path()) return;
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
}

// Moves a finished temporary file into place.
inline void replace_file(const std::filesystem::path& tmp, const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

}  // namespace dfbench::detail

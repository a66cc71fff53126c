#pragma once

#include <filesystem>

#include "dfbench/tensor.hpp"

namespace dfbench::data {

// Decodes an image file into a [3,H,W] RGB tensor scaled to [0,1].
// IoError when the file is missing, FormatError when it cannot be decoded.
Tensor load_image(const std::filesystem::path& path);

// load_image followed by a bilinear resize to target x target.
Tensor resize_normalize(const std::filesystem::path& path, std::size_t target);

// Bilinear resize (half-pixel centres) of [C,H,W] or [N,C,H,W] to size x size.
Tensor resize_bilinear(const Tensor& images, std::size_t size);

// Writes a [3,H,W] tensor in [0,1] as an 8-bit image (format from the extension).
void save_image(const Tensor& image, const std::filesystem::path& path);

}  // namespace dfbench::data

#pragma once

#include <filesystem>

#include "harmony/data/image.hpp"

namespace harmony {

// Reads PNG (8/16-bit gray, gray+alpha, RGB, RGBA, palette) or binary
// PGM/PPM (P5/P6). Alpha is dropped. Values are scaled to [0,1].
// Throws IoError naming the path on any failure.
ImageTensor read_image(const std::filesystem::path& path);

// Writes an 8-bit PNG; values are clamped to [0,1] and rounded.
void write_png(const std::filesystem::path& path, const ImageTensor& image);

}  // namespace harmony

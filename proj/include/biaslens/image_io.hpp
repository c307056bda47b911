#pragma once

#include <filesystem>

#include "biaslens/image.hpp"

namespace biaslens::image {

// Reads an 8-bit PNG (gray or RGB; alpha, palette, 16-bit and interlaced
// files are rejected with a FormatError naming the property) or a binary
// PGM/PPM with maxval 255. Intensities are scaled from [0,255] to [0,1].
ImageTensor load_image(const std::filesystem::path& path);

// Writes an 8-bit PNG. Each intensity v is stored as round(v*255), halves
// away from zero. Output bytes are deterministic for identical input.
void save_image(const ImageTensor& img, const std::filesystem::path& path);

}  // namespace biaslens::image

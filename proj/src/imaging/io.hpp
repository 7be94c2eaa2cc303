#pragma once

#include "imaging/image.hpp"

#include <string>

namespace cfe::img {

// Reads an 8- or 16-bit RGB PNG or a binary PPM (P6). Dispatch is on magic
// bytes, not file extension. Values are scaled to [0,1].
Image load_image(const std::string& path);

// Clamps to [0,1], quantizes to 8 bits with round-half-away-from-zero and
// writes an RGB PNG.
void save_image(const Image& image, const std::string& path);

// 16-bit variant of the same quantization rule; used where 8-bit rounding
// noise would matter (synthetic dataset generation).
void save_image_png16(const Image& image, const std::string& path);

} // namespace cfe::img

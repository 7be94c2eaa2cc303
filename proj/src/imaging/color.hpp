#pragma once

#include "imaging/image.hpp"

#include <array>

namespace cfe::img {

// sRGB (IEC 61966-2-1) -> XYZ (D65) -> CIELab. Inputs are clamped to [0,1];
// L lands in [0,100], a/b are signed.
std::array<double, 3> srgb_to_lab(double r, double g, double b);

// Per-pixel conversion of a whole image; layout matches Image (h, w, 3).
std::vector<double> srgb_to_lab(const Image& image);

} // namespace cfe::img

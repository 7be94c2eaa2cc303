#pragma once

#include "imaging/image.hpp"

#include <cstdint>

namespace cfe::img {

struct MetricsRecord {
    double lab_l2 = 0.0; // mean per-pixel Euclidean CIELab distance
    double psnr = 0.0;   // dB, capped at 99.0
    double ssim = 0.0;
};

// An empty mask means every pixel is valid. Non-empty masks are h*w with
// 1 marking original pixels; padded pixels never contribute.

double lab_l2_error(const Image& a, const Image& b, const std::vector<std::uint8_t>& mask = {});

// 10*log10(1/MSE) over valid RGB elements, peak 1.0; capped at 99.0 dB when
// MSE drops below 1e-10.
double psnr(const Image& a, const Image& b, const std::vector<std::uint8_t>& mask = {});

// Single-scale SSIM on Rec. 601 luma; 11x11 Gaussian window, sigma 1.5,
// K1 = 0.01, K2 = 0.03, dynamic range 1.0. Windows must lie fully inside the
// valid region.
double ssim(const Image& a, const Image& b, const std::vector<std::uint8_t>& mask = {});

MetricsRecord compute_metrics(const Image& a, const Image& b,
                              const std::vector<std::uint8_t>& mask = {});

} // namespace cfe::img

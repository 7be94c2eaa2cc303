#pragma once

// Synthetic paired datasets for desk-scale training runs. Written as 16-bit
// PNGs so quantization noise stays far below the training tolerances.

#include "common/rng.hpp"
#include "imaging/image.hpp"
#include "models/cenet.hpp"

#include <string>

namespace synth {

// Smooth low-frequency random image with values inside [lo, hi].
cfe::img::Image smooth_image(int width, int height, cfe::Rng& rng, double lo = 0.15,
                             double hi = 0.85);

// target = raw + (W raw + b) for a fixed global map.
struct AffineTask {
    cfe::models::AffineColorMap map; // defaults to W = -0.2 I, b = 0.1
    AffineTask() {
        map.weight = {-0.2, 0, 0, 0, -0.2, 0, 0, 0, -0.2};
        map.bias = {0.1, 0.1, 0.1};
    }
};

// Writes `count` pairs (stem NNN.png) into raw_dir/target_dir.
void make_affine_set(const std::string& raw_dir, const std::string& target_dir, int count,
                     int size, std::uint64_t seed, const AffineTask& task = {});

// Global affine plus a smooth field whose per-image amplitude tracks the
// image's mean brightness; the field itself is fixed across the set.
void make_affine_field_set(const std::string& raw_dir, const std::string& target_dir, int count,
                           int size, std::uint64_t seed);

// target = raw scaled by a fixed centered vignette (purely spatial task).
void make_vignette_set(const std::string& raw_dir, const std::string& target_dir, int count,
                       int size, std::uint64_t seed);

} // namespace synth

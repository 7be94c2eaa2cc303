#pragma once

#include "nn/tensor.hpp"

#include <cstdint>
#include <vector>

namespace cfe::img {

// RGB image, values in [0,1] after load/normalize, interleaved rows (h, w, 3).
// Enhancement outputs may leave [0,1]; clamping happens at save time only.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> pix; // h * w * 3

    Image() = default;
    Image(int w, int h) : width(w), height(h), pix(static_cast<std::size_t>(w) * h * 3, 0.0) {}

    double& at(int x, int y, int c) { return pix[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const {
        return pix[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::size_t numel() const { return pix.size(); }
};

// Square image with a top-left-anchored valid region left over from padding.
struct PaddedImage {
    Image image;                    // S x S
    std::vector<std::uint8_t> mask; // S * S, 1 = original pixel
    int original_width = 0;
    int original_height = 0;
};

// Bilinear resize so the longer edge equals `target`; aspect ratio kept,
// shorter edge rounded to nearest (min 1).
Image resize_longer_edge(const Image& in, int target);

// Arbitrary-size bilinear resample with half-pixel centers.
Image resize_bilinear(const Image& in, int new_w, int new_h);

PaddedImage pad_to_square(const Image& in, int size);
Image unpad(const PaddedImage& p);

Image clamp01(const Image& in);

// (1,3,h,w) tensor <-> image
nn::Tensor image_to_tensor(const Image& in);
Image tensor_to_image(const nn::Tensor& t, int batch_index = 0);

// (1,1,S,S) float mask from a padded image's validity map
nn::Tensor mask_to_tensor(const PaddedImage& p);
// same mask replicated over 3 channels, for per-element losses
nn::Tensor mask_to_tensor3(const PaddedImage& p);

} // namespace cfe::img

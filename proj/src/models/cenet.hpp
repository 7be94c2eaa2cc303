#pragma once

#include "common/rng.hpp"
#include "imaging/image.hpp"
#include "nn/layers.hpp"

#include <array>

namespace cfe::models {

// 3x3 color mixing matrix plus per-channel offset: the 12 continuous
// parameters of the channel-wise enhancement.
struct AffineColorMap {
    std::array<double, 9> weight{}; // row-major
    std::array<double, 3> bias{};
};

struct CENetConfig {
    std::vector<int> backbone_channels{16, 32, 64, 128};
    std::vector<int> head_widths{64, 32};
};

// Global enhancer: a small conv backbone pooled to a feature vector, then
// three fully-connected layers ending in the 12 affine parameters. The final
// layer starts at zero so an untrained model is the identity enhancement.
class CENet {
public:
    CENet(const CENetConfig& cfg, Rng& rng);

    // (n,12,1,1), one parameter set per batch element
    nn::Tensor predict_params(nn::Tape* tape, const nn::Tensor& image, bool training);

    std::vector<AffineColorMap> predict_affine(const nn::Tensor& image, bool training = false);

    // image + r_c
    nn::Tensor enhance(nn::Tape* tape, const nn::Tensor& image, bool training);

    nn::ParamStore& params() { return store_; }
    const CENetConfig& config() const { return cfg_; }

private:
    CENetConfig cfg_;
    nn::ParamStore store_;
    std::vector<nn::ConvBNRelu> backbone_;
    std::vector<nn::Linear> head_;
};

AffineColorMap affine_from_params(const nn::Tensor& params, int batch_index = 0);
nn::Tensor params_from_affine(const AffineColorMap& map);

// r_c for a single image under an explicit map (no autodiff involved)
img::Image apply_affine_residual(const img::Image& image, const AffineColorMap& map);

} // namespace cfe::models

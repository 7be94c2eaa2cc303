#pragma once

#include "common/rng.hpp"
#include "nn/layers.hpp"

#include <optional>

namespace cfe::models {

enum class NonLocalPosition { front, middle, end };

struct PRNetConfig {
    int base_channels = 16;
    int num_residual_blocks = 3;
    bool use_nonlocal = true;
    NonLocalPosition nonlocal_position = NonLocalPosition::front;
};

// Refinement network: downsampling (stride-1 conv + two stride-2 convs),
// feature transformation (optional non-local block + residual blocks at
// 4x base channels), and a mirrored upsampling stage ending in a linear
// 3-channel conv. The output is a signed residual; the final conv starts at
// zero so a fresh model refines nothing.
class PRNet {
public:
    PRNet(const PRNetConfig& cfg, Rng& rng);

    // coarse (n,3,h,w) -> residual of identical shape; h and w must be
    // divisible by 4
    nn::Tensor forward(nn::Tape* tape, const nn::Tensor& coarse, bool training);

    nn::ParamStore& params() { return store_; }
    const PRNetConfig& config() const { return cfg_; }

private:
    PRNetConfig cfg_;
    nn::ParamStore store_;
    std::vector<nn::ConvBNRelu> down_;
    std::optional<nn::NonLocalBlock> nonlocal_;
    std::vector<nn::ResidualBlock> blocks_;
    std::vector<nn::DeconvBNRelu> up_;
    std::optional<nn::Conv2d> out_conv_;
};

} // namespace cfe::models

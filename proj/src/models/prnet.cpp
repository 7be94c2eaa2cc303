#include "models/prnet.hpp"

#include "common/error.hpp"

namespace cfe::models {

PRNet::PRNet(const PRNetConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg_.base_channels < 1)
        throw Error::config("prnet: base_channels must be >= 1");
    if (cfg_.num_residual_blocks < 1)
        throw Error::config("prnet: num_residual_blocks must be >= 1");

    const int c1 = cfg_.base_channels, c2 = 2 * c1, c4 = 4 * c1;
    down_.emplace_back(store_, "prnet.down.0", 3, c1, 3, 1, 1, rng);
    down_.emplace_back(store_, "prnet.down.1", c1, c2, 3, 2, 1, rng);
    down_.emplace_back(store_, "prnet.down.2", c2, c4, 3, 2, 1, rng);

    if (cfg_.use_nonlocal)
        nonlocal_.emplace(store_, "prnet.transform.nonlocal", c4, rng);
    for (int i = 0; i < cfg_.num_residual_blocks; ++i)
        blocks_.emplace_back(store_, "prnet.transform.res" + std::to_string(i), c4, rng);

    up_.emplace_back(store_, "prnet.up.0", c4, c2, 4, 2, 1, rng);
    up_.emplace_back(store_, "prnet.up.1", c2, c1, 4, 2, 1, rng);
    out_conv_.emplace(store_, "prnet.out", c1, 3, 3, 1, 1, /*bias=*/true, nn::Init::zero, rng);
}

nn::Tensor PRNet::forward(nn::Tape* tape, const nn::Tensor& coarse, bool training) {
    const nn::Shape& s = coarse.shape();
    if (s.c != 3)
        throw Error::usage("prnet: expected a 3-channel input, got " + s.str());
    if (s.h % 4 != 0 || s.w % 4 != 0)
        throw Error::usage("prnet: spatial dimensions must be divisible by 4, got " + s.str());

    nn::Tensor x = coarse;
    for (auto& d : down_)
        x = d.forward(tape, x, training);

    const int nb = cfg_.num_residual_blocks;
    const int middle = (nb + 1) / 2; // after this many blocks
    if (nonlocal_ && cfg_.nonlocal_position == NonLocalPosition::front)
        x = nonlocal_->forward(tape, x);
    for (int i = 0; i < nb; ++i) {
        x = blocks_[static_cast<std::size_t>(i)].forward(tape, x, training);
        if (nonlocal_ && cfg_.nonlocal_position == NonLocalPosition::middle && i + 1 == middle)
            x = nonlocal_->forward(tape, x);
    }
    if (nonlocal_ && cfg_.nonlocal_position == NonLocalPosition::end)
        x = nonlocal_->forward(tape, x);

    for (auto& u : up_)
        x = u.forward(tape, x, training);
    return out_conv_->forward(tape, x);
}

} // namespace cfe::models

#include "models/cenet.hpp"

#include "common/error.hpp"

namespace cfe::models {

CENet::CENet(const CENetConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg_.backbone_channels.empty())
        throw Error::config("cenet: backbone_channels must not be empty");
    int in_c = 3;
    for (std::size_t i = 0; i < cfg_.backbone_channels.size(); ++i) {
        backbone_.emplace_back(store_, "cenet.backbone." + std::to_string(i), in_c,
                               cfg_.backbone_channels[i], 3, 2, 1, rng);
        in_c = cfg_.backbone_channels[i];
    }
    int in_f = in_c;
    std::size_t li = 0;
    for (int width : cfg_.head_widths) {
        head_.emplace_back(store_, "cenet.head." + std::to_string(li++), in_f, width,
                           nn::Init::kaiming, rng);
        in_f = width;
    }
    // zero weights and bias: a fresh model predicts the identity map
    head_.emplace_back(store_, "cenet.head." + std::to_string(li), in_f, 12, nn::Init::zero,
                       rng);
}

nn::Tensor CENet::predict_params(nn::Tape* tape, const nn::Tensor& image, bool training) {
    if (image.shape().c != 3)
        throw Error::usage("cenet: expected a 3-channel image batch, got " +
                           image.shape().str());
    nn::Tensor x = image;
    for (auto& block : backbone_)
        x = block.forward(tape, x, training);
    x = nn::global_avg_pool(tape, x);
    for (std::size_t i = 0; i + 1 < head_.size(); ++i)
        x = nn::relu(tape, head_[i].forward(tape, x));
    return head_.back().forward(tape, x);
}

std::vector<AffineColorMap> CENet::predict_affine(const nn::Tensor& image, bool training) {
    nn::Tensor p = predict_params(nullptr, image, training);
    std::vector<AffineColorMap> maps;
    maps.reserve(static_cast<std::size_t>(p.shape().n));
    for (int n = 0; n < p.shape().n; ++n)
        maps.push_back(affine_from_params(p, n));
    return maps;
}

nn::Tensor CENet::enhance(nn::Tape* tape, const nn::Tensor& image, bool training) {
    nn::Tensor p = predict_params(tape, image, training);
    return nn::add(tape, image, nn::affine_color_residual(tape, image, p));
}

AffineColorMap affine_from_params(const nn::Tensor& params, int batch_index) {
    AffineColorMap map;
    const double* d = params.data() + static_cast<std::size_t>(batch_index) * 12;
    for (int i = 0; i < 9; ++i)
        map.weight[i] = d[i];
    for (int i = 0; i < 3; ++i)
        map.bias[i] = d[9 + i];
    return map;
}

nn::Tensor params_from_affine(const AffineColorMap& map) {
    std::vector<double> v(12);
    for (int i = 0; i < 9; ++i)
        v[i] = map.weight[i];
    for (int i = 0; i < 3; ++i)
        v[9 + i] = map.bias[i];
    return nn::Tensor::from_data({1, 12, 1, 1}, std::move(v));
}

img::Image apply_affine_residual(const img::Image& image, const AffineColorMap& map) {
    img::Image out(image.width, image.height);
    const std::size_t n = image.pix.size() / 3;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = image.pix[3 * i], g = image.pix[3 * i + 1], b = image.pix[3 * i + 2];
        for (int a = 0; a < 3; ++a)
            out.pix[3 * i + a] = map.weight[3 * a] * r + map.weight[3 * a + 1] * g +
                                 map.weight[3 * a + 2] * b + map.bias[a];
    }
    return out;
}

} // namespace cfe::models

#include "nn/layers.hpp"

#include "common/error.hpp"

#include <cmath>

namespace cfe::nn {

Parameter& ParamStore::add(const std::string& name, Tensor init) {
    if (by_name_.count(name) || buf_by_name_.count(name))
        throw Error::usage("duplicate parameter name: " + name);
    init.set_requires_grad(true);
    params_.push_back(Parameter{name, std::move(init), {}});
    Parameter& p = params_.back();
    p.momentum.assign(p.value.numel(), 0.0);
    by_name_[name] = &p;
    return p;
}

Tensor& ParamStore::add_buffer(const std::string& name, Tensor init) {
    if (by_name_.count(name) || buf_by_name_.count(name))
        throw Error::usage("duplicate buffer name: " + name);
    buffers_.push_back(NamedBuffer{name, std::move(init)});
    NamedBuffer& b = buffers_.back();
    buf_by_name_[name] = &b;
    return b.value;
}

Parameter* ParamStore::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParamStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

NamedBuffer* ParamStore::find_buffer(const std::string& name) {
    auto it = buf_by_name_.find(name);
    return it == buf_by_name_.end() ? nullptr : it->second;
}

void ParamStore::zero_grads() {
    for (Parameter& p : params_)
        p.value.zero_grad();
}

std::size_t ParamStore::total_scalars() const {
    std::size_t n = 0;
    for (const Parameter& p : params_)
        n += p.value.numel();
    return n;
}

Tensor kaiming_normal(const Shape& s, int fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(s);
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    double* d = t.data();
    const std::size_t n = t.numel();
    for (std::size_t i = 0; i < n; ++i)
        d[i] = std * rng.normal();
    return t;
}

Conv2d::Conv2d(ParamStore& store, const std::string& prefix, int in_c, int out_c, int k,
               int stride, int padding, bool with_bias, Init init, Rng& rng)
    : stride_(stride), padding_(padding) {
    Shape ws{out_c, in_c, k, k};
    Tensor w = init == Init::zero ? Tensor::zeros(ws) : kaiming_normal(ws, in_c * k * k, rng);
    w_ = &store.add(prefix + ".weight", std::move(w));
    if (with_bias)
        b_ = &store.add(prefix + ".bias", Tensor::zeros({1, out_c, 1, 1}));
}

Tensor Conv2d::forward(Tape* tape, const Tensor& x) const {
    return conv2d(tape, x, w_->value, b_ ? b_->value : Tensor{}, stride_, padding_);
}

ConvTranspose2d::ConvTranspose2d(ParamStore& store, const std::string& prefix, int in_c,
                                 int out_c, int k, int stride, int padding, bool with_bias,
                                 Init init, Rng& rng)
    : stride_(stride), padding_(padding) {
    Shape ws{in_c, out_c, k, k};
    Tensor w = init == Init::zero ? Tensor::zeros(ws) : kaiming_normal(ws, in_c * k * k, rng);
    w_ = &store.add(prefix + ".weight", std::move(w));
    if (with_bias)
        b_ = &store.add(prefix + ".bias", Tensor::zeros({1, out_c, 1, 1}));
}

Tensor ConvTranspose2d::forward(Tape* tape, const Tensor& x) const {
    return conv2d_transpose(tape, x, w_->value, b_ ? b_->value : Tensor{}, stride_, padding_);
}

BatchNorm2d::BatchNorm2d(ParamStore& store, const std::string& prefix, int channels,
                         double momentum, double eps)
    : momentum_(momentum), eps_(eps) {
    gamma_ = &store.add(prefix + ".gamma", Tensor::full({1, channels, 1, 1}, 1.0));
    beta_ = &store.add(prefix + ".beta", Tensor::zeros({1, channels, 1, 1}));
    stats_.mean = store.add_buffer(prefix + ".running_mean", Tensor::zeros({1, channels, 1, 1}));
    stats_.var = store.add_buffer(prefix + ".running_var", Tensor::full({1, channels, 1, 1}, 1.0));
    stats_.initialized = true;
}

Tensor BatchNorm2d::forward(Tape* tape, const Tensor& x, bool training) {
    return batchnorm(tape, x, gamma_->value, beta_->value, stats_, training, momentum_, eps_);
}

Linear::Linear(ParamStore& store, const std::string& prefix, int in_f, int out_f, Init init,
               Rng& rng) {
    Shape ws{out_f, in_f, 1, 1};
    Tensor w = init == Init::zero ? Tensor::zeros(ws) : kaiming_normal(ws, in_f, rng);
    w_ = &store.add(prefix + ".weight", std::move(w));
    b_ = &store.add(prefix + ".bias", Tensor::zeros({1, out_f, 1, 1}));
}

Tensor Linear::forward(Tape* tape, const Tensor& x) const {
    return linear(tape, x, w_->value, b_->value);
}

ConvBNRelu::ConvBNRelu(ParamStore& store, const std::string& prefix, int in_c, int out_c, int k,
                       int stride, int padding, Rng& rng)
    : conv_(store, prefix, in_c, out_c, k, stride, padding, /*bias=*/false, Init::kaiming, rng),
      bn_(store, prefix + ".bn", out_c) {}

Tensor ConvBNRelu::forward(Tape* tape, const Tensor& x, bool training) {
    return relu(tape, bn_.forward(tape, conv_.forward(tape, x), training));
}

DeconvBNRelu::DeconvBNRelu(ParamStore& store, const std::string& prefix, int in_c, int out_c,
                           int k, int stride, int padding, Rng& rng)
    : conv_(store, prefix, in_c, out_c, k, stride, padding, /*bias=*/false, Init::kaiming, rng),
      bn_(store, prefix + ".bn", out_c) {}

Tensor DeconvBNRelu::forward(Tape* tape, const Tensor& x, bool training) {
    return relu(tape, bn_.forward(tape, conv_.forward(tape, x), training));
}

ResidualBlock::ResidualBlock(ParamStore& store, const std::string& prefix, int channels,
                             Rng& rng)
    : conv1_(store, prefix + ".conv1", channels, channels, 3, 1, 1, false, Init::kaiming, rng),
      conv2_(store, prefix + ".conv2", channels, channels, 3, 1, 1, false, Init::kaiming, rng),
      bn1_(store, prefix + ".bn1", channels), bn2_(store, prefix + ".bn2", channels) {}

Tensor ResidualBlock::forward(Tape* tape, const Tensor& x, bool training) {
    Tensor f = relu(tape, bn1_.forward(tape, conv1_.forward(tape, x), training));
    f = bn2_.forward(tape, conv2_.forward(tape, f), training);
    return add(tape, x, f);
}

NonLocalBlock::NonLocalBlock(ParamStore& store, const std::string& prefix, int channels,
                             Rng& rng)
    : theta_(store, prefix + ".theta", channels, channels / 2, 1, 1, 0, true, Init::kaiming, rng),
      phi_(store, prefix + ".phi", channels, channels / 2, 1, 1, 0, true, Init::kaiming, rng),
      g_(store, prefix + ".g", channels, channels / 2, 1, 1, 0, true, Init::kaiming, rng),
      w_z_(store, prefix + ".w_z", channels / 2, channels, 1, 1, 0, true, Init::zero, rng),
      channels_(channels) {
    if (channels % 2 != 0)
        throw Error::usage("non-local block requires an even channel count, got " +
                           std::to_string(channels));
}

Tensor NonLocalBlock::forward(Tape* tape, const Tensor& x) const {
    const Shape& xs = x.shape();
    if (xs.c != channels_)
        throw Error::usage("non-local block: expected " + std::to_string(channels_) +
                           " channels, got " + std::to_string(xs.c));
    const int m = xs.h * xs.w;
    const int half = channels_ / 2;

    Tensor th = theta_.forward(tape, x); // (n, C/2, h, w)
    Tensor ph = phi_.forward(tape, x);
    Tensor gg = g_.forward(tape, x);

    Tensor tf = reshape(tape, th, {xs.n, 1, half, m});
    Tensor pf = reshape(tape, ph, {xs.n, 1, half, m});
    Tensor gf = reshape(tape, gg, {xs.n, 1, half, m});

    // attention[i][j] = <theta_i, phi_j>, row-softmaxed over j
    Tensor logits = matmul(tape, transpose_mat(tape, tf), pf);   // (n,1,m,m)
    Tensor attn = softmax_lastdim(tape, logits);
    Tensor y = matmul(tape, attn, transpose_mat(tape, gf));      // (n,1,m,C/2)
    Tensor yf = reshape(tape, transpose_mat(tape, y), {xs.n, half, xs.h, xs.w});

    return add(tape, x, w_z_.forward(tape, yf));
}

} // namespace cfe::nn

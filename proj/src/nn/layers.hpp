#pragma once

#include "common/rng.hpp"
#include "nn/ops.hpp"

#include <deque>
#include <map>
#include <string>

namespace cfe::nn {

// Trainable tensor with its optimizer state.
struct Parameter {
    std::string name;
    Tensor value;                 // requires_grad = true
    std::vector<double> momentum; // same length as value, zero-initialized
};

// Non-trainable persistent state (batchnorm running statistics).
struct NamedBuffer {
    std::string name;
    Tensor value;
};

// Owns every parameter and buffer of one model, in registration order.
// Names are unique; lookups are by exact name.
class ParamStore {
public:
    Parameter& add(const std::string& name, Tensor init);
    Tensor& add_buffer(const std::string& name, Tensor init);

    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;
    NamedBuffer* find_buffer(const std::string& name);

    std::deque<Parameter>& params() { return params_; }
    const std::deque<Parameter>& params() const { return params_; }
    std::deque<NamedBuffer>& buffers() { return buffers_; }
    const std::deque<NamedBuffer>& buffers() const { return buffers_; }

    void zero_grads();
    std::size_t total_scalars() const;

private:
    std::deque<Parameter> params_;
    std::deque<NamedBuffer> buffers_;
    std::map<std::string, Parameter*> by_name_;
    std::map<std::string, NamedBuffer*> buf_by_name_;
};

enum class Init { kaiming, zero };

Tensor kaiming_normal(const Shape& s, int fan_in, Rng& rng);

class Conv2d {
public:
    Conv2d(ParamStore& store, const std::string& prefix, int in_c, int out_c, int k, int stride,
           int padding, bool with_bias, Init init, Rng& rng);
    Tensor forward(Tape* tape, const Tensor& x) const;

private:
    Parameter* w_ = nullptr;
    Parameter* b_ = nullptr;
    int stride_, padding_;
};

class ConvTranspose2d {
public:
    ConvTranspose2d(ParamStore& store, const std::string& prefix, int in_c, int out_c, int k,
                    int stride, int padding, bool with_bias, Init init, Rng& rng);
    Tensor forward(Tape* tape, const Tensor& x) const;

private:
    Parameter* w_ = nullptr;
    Parameter* b_ = nullptr;
    int stride_, padding_;
};

class BatchNorm2d {
public:
    BatchNorm2d(ParamStore& store, const std::string& prefix, int channels,
                double momentum = 0.1, double eps = 1e-5);
    Tensor forward(Tape* tape, const Tensor& x, bool training);

private:
    Parameter* gamma_ = nullptr;
    Parameter* beta_ = nullptr;
    BatchNormStats stats_;
    double momentum_, eps_;
};

class Linear {
public:
    Linear(ParamStore& store, const std::string& prefix, int in_f, int out_f, Init init,
           Rng& rng);
    Tensor forward(Tape* tape, const Tensor& x) const;

private:
    Parameter* w_ = nullptr;
    Parameter* b_ = nullptr;
};

// conv -> batchnorm -> relu; the conv carries no bias since batchnorm absorbs it
class ConvBNRelu {
public:
    ConvBNRelu(ParamStore& store, const std::string& prefix, int in_c, int out_c, int k,
               int stride, int padding, Rng& rng);
    Tensor forward(Tape* tape, const Tensor& x, bool training);

private:
    Conv2d conv_;
    BatchNorm2d bn_;
};

class DeconvBNRelu {
public:
    DeconvBNRelu(ParamStore& store, const std::string& prefix, int in_c, int out_c, int k,
                 int stride, int padding, Rng& rng);
    Tensor forward(Tape* tape, const Tensor& x, bool training);

private:
    ConvTranspose2d conv_;
    BatchNorm2d bn_;
};

// x + BN(conv(relu(BN(conv(x))))); no activation after the skip addition
class ResidualBlock {
public:
    ResidualBlock(ParamStore& store, const std::string& prefix, int channels, Rng& rng);
    Tensor forward(Tape* tape, const Tensor& x, bool training);

private:
    Conv2d conv1_, conv2_;
    BatchNorm2d bn1_, bn2_;
};

// Embedded-Gaussian attention over all spatial positions with a C/2
// bottleneck; w_z starts at zero so the block is the identity at init.
class NonLocalBlock {
public:
    NonLocalBlock(ParamStore& store, const std::string& prefix, int channels, Rng& rng);
    Tensor forward(Tape* tape, const Tensor& x) const;

private:
    Conv2d theta_, phi_, g_, w_z_;
    int channels_;
};

} // namespace cfe::nn

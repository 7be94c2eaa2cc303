#include "nn/tensor.hpp"

#include "common/error.hpp"

#include <cmath>

namespace cfe::nn {

std::string Shape::str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
}

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
    Tensor t;
    t.shape_ = s;
    t.data_ = std::make_shared<Buffer>();
    t.data_->v.assign(s.numel(), 0.0);
    if (requires_grad)
        t.set_requires_grad(true);
    return t;
}

Tensor Tensor::full(const Shape& s, double value) {
    Tensor t = zeros(s);
    for (double& x : t.data_->v)
        x = value;
    return t;
}

Tensor Tensor::from_data(const Shape& s, std::vector<double> values) {
    if (values.size() != s.numel())
        throw Error::usage("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + s.str());
    Tensor t;
    t.shape_ = s;
    t.data_ = std::make_shared<Buffer>();
    t.data_->v = std::move(values);
    return t;
}

Tensor Tensor::scalar(double value) { return from_data({1, 1, 1, 1}, {value}); }

double Tensor::item() const {
    if (numel() != 1)
        throw Error::usage("item() on tensor of shape " + shape_.str());
    return data_->v[0];
}

void Tensor::set_requires_grad(bool on) {
    requires_grad_ = on;
    if (on)
        ensure_grad();
}

void Tensor::ensure_grad() {
    if (!grad_) {
        grad_ = std::make_shared<Buffer>();
        grad_->v.assign(numel(), 0.0);
    }
}

void Tensor::zero_grad() {
    if (grad_)
        grad_->v.assign(grad_->v.size(), 0.0);
}

Tensor Tensor::value_copy() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<Buffer>();
    t.data_->v = data_->v;
    return t;
}

Tensor Tensor::reshaped_view(const Shape& s) const {
    if (s.numel() != numel())
        throw Error::usage("reshape " + shape_.str() + " -> " + s.str() + ": element count differs");
    Tensor t = *this;
    t.shape_ = s;
    // a view shares values only; gradient state belongs to the op that makes it
    t.grad_.reset();
    t.requires_grad_ = false;
    return t;
}

bool Tensor::all_finite() const {
    for (double x : data_->v)
        if (!std::isfinite(x))
            return false;
    return true;
}

} // namespace cfe::nn

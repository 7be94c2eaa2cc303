#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace cfe::nn {

struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
               static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

// Dense 4-D tensor over (n, c, h, w), row-major, 64-bit reals. Copies are
// shallow: they share both the data and the gradient buffer, which is what
// makes additive gradient accumulation across graph branches work.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& s, bool requires_grad = false);
    static Tensor full(const Shape& s, double value);
    static Tensor from_data(const Shape& s, std::vector<double> values);
    static Tensor scalar(double value);

    const Shape& shape() const { return shape_; }
    std::size_t numel() const { return shape_.numel(); }
    bool defined() const { return static_cast<bool>(data_); }

    double* data() { return data_->v.data(); }
    const double* data() const { return data_->v.data(); }

    double& at(int n, int c, int h, int w) { return data_->v[index(n, c, h, w)]; }
    double at(int n, int c, int h, int w) const { return data_->v[index(n, c, h, w)]; }

    std::size_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }

    // value of a one-element tensor
    double item() const;

    bool requires_grad() const { return requires_grad_; }
    // Enabling allocates the gradient buffer immediately so that later copies
    // of this tensor all share it.
    void set_requires_grad(bool on);

    bool has_grad() const { return static_cast<bool>(grad_); }
    double* grad() { return grad_->v.data(); }
    const double* grad() const { return grad_->v.data(); }
    std::vector<double>& grad_vec() { return grad_->v; }
    void ensure_grad();
    void zero_grad();

    // fresh tensor with the same values, detached from any gradient state
    Tensor value_copy() const;

    // same storage viewed under a different shape (numel must match)
    Tensor reshaped_view(const Shape& s) const;

    bool all_finite() const;
    bool same_storage(const Tensor& other) const { return data_ == other.data_; }

private:
    struct Buffer {
        std::vector<double> v;
    };

    Shape shape_;
    std::shared_ptr<Buffer> data_;
    std::shared_ptr<Buffer> grad_;
    bool requires_grad_ = false;
};

} // namespace cfe::nn

#pragma once

#include "nn/tape.hpp"

namespace cfe::nn {

// Per-channel running statistics owned by a batchnorm layer. `initialized`
// flips on the first train-mode pass (or on checkpoint load); eval mode
// before that is an error at the op level.
struct BatchNormStats {
    Tensor mean; // (1, c, 1, 1)
    Tensor var;  // (1, c, 1, 1)
    bool initialized = false;
};

// All ops are functional: inputs are never mutated, every op allocates its
// output. Passing tape == nullptr runs forward-only (no recording).
// Optional tensors (bias, mask) are skipped when default-constructed.

// input (n,ci,h,w) * weight (co,ci,k,k) + bias (1,co,1,1); cross-correlation.
Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

// Exact adjoint of conv2d as a linear map, bias aside. input (n,co,h,w),
// weight (co,ci,k,k) as in the paired conv2d, bias (1,ci,1,1).
// Output spatial size is (h-1)*stride - 2*padding + k.
Tensor conv2d_transpose(Tape* tape, const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride, int padding);

Tensor batchnorm(Tape* tape, const Tensor& input, const Tensor& gamma, const Tensor& beta,
                 BatchNormStats& running, bool training, double momentum, double eps);

Tensor relu(Tape* tape, const Tensor& x);

// x (n,f,1,1) viewed as n x f; weight (out,f,1,1); bias (1,out,1,1).
Tensor linear(Tape* tape, const Tensor& x, const Tensor& weight, const Tensor& bias);

// Stable softmax along the last (w) axis of every (n,c,h) row.
Tensor softmax_lastdim(Tape* tape, const Tensor& x);

// Mean squared error over unmasked elements; mask entries are 0/1 weights.
Tensor mse_loss(Tape* tape, const Tensor& pred, const Tensor& target, const Tensor& mask = {});

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& x, double k);
Tensor sum(Tape* tape, const Tensor& x);

Tensor reshape(Tape* tape, const Tensor& x, const Shape& s);

// (n,c,r,k) -> (n,c,k,r), per (n,c) slice.
Tensor transpose_mat(Tape* tape, const Tensor& x);

// (n,c,r,k) x (n,c,k,m) -> (n,c,r,m), per (n,c) slice.
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);

Tensor global_avg_pool(Tape* tape, const Tensor& x);

// image (n,3,h,w), params (n,12,1,1): rows 0..8 hold the 3x3 matrix row-major,
// 9..11 the bias. Output r with r[p] = W * image[p] + b at every pixel.
Tensor affine_color_residual(Tape* tape, const Tensor& image, const Tensor& params);

// Zero-fill on the bottom/right to (new_h, new_w) / crop back.
Tensor pad_spatial(Tape* tape, const Tensor& x, int new_h, int new_w);
Tensor crop_spatial(Tape* tape, const Tensor& x, int new_h, int new_w);

} // namespace cfe::nn

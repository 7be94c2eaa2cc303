#pragma once

// Independent brute-force references used to pin expected values. These stay
// deliberately naive (plain nested loops, no shared code with the library's
// forward paths).

#include "imaging/image.hpp"
#include "nn/tensor.hpp"

#include <array>
#include <vector>

namespace oracle {

// direct 7-loop cross-correlation
cfe::nn::Tensor conv2d_loops(const cfe::nn::Tensor& x, const cfe::nn::Tensor& w,
                             const std::vector<double>& bias, int stride, int padding);

// direct matmul for (n,f) x (out,f)^T + b
cfe::nn::Tensor linear_loops(const cfe::nn::Tensor& x, const cfe::nn::Tensor& w,
                             const std::vector<double>& bias);

// all-pairs embedded-Gaussian attention on a single batch element
cfe::nn::Tensor nonlocal_loops(const cfe::nn::Tensor& x, const cfe::nn::Tensor& theta_w,
                               const std::vector<double>& theta_b,
                               const cfe::nn::Tensor& phi_w, const std::vector<double>& phi_b,
                               const cfe::nn::Tensor& g_w, const std::vector<double>& g_b,
                               const cfe::nn::Tensor& wz_w, const std::vector<double>& wz_b);

// attention rows of the same block, for row-sum and symmetry probes
std::vector<double> nonlocal_attention_rows(const cfe::nn::Tensor& x,
                                            const cfe::nn::Tensor& theta_w,
                                            const std::vector<double>& theta_b,
                                            const cfe::nn::Tensor& phi_w,
                                            const std::vector<double>& phi_b);

// independently written sRGB -> CIELab (same standard, separate code path)
std::array<double, 3> srgb_to_lab_reference(double r, double g, double b);

// plain sliding-window SSIM with the standard constants
double ssim_loops(const cfe::img::Image& a, const cfe::img::Image& b);

double lab_l2_loops(const cfe::img::Image& a, const cfe::img::Image& b);

} // namespace oracle

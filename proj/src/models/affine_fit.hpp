#pragma once

#include "models/cenet.hpp"

#include <cstdint>

namespace cfe::models {

struct AffineFitResult {
    AffineColorMap map;
    double loss = 0.0;       // per-element MSE, matching the training loss scale
    bool degenerate = false; // pseudo-inverse fallback was needed
};

// Closed-form optimum of mean || p + W p + b - t ||^2 over (W, b) via normal
// equations on homogeneous pixel vectors. Serves as an independent lower
// bound on what channel-wise training can reach.
class AffineLsFit {
public:
    void add(const img::Image& raw, const img::Image& target,
             const std::vector<std::uint8_t>& mask = {});
    AffineFitResult solve() const;

    std::size_t pixel_count() const { return count_; }

private:
    double m_[4][4] = {};   // sum of z z^T, z = (r, g, b, 1)
    double rhs_[3][4] = {}; // per output channel: sum of z * q_a
    std::size_t count_ = 0;
    // retained samples (r, g, b, q0, q1, q2); the loss is evaluated directly
    // on these, which stays accurate where the normal-equation residual
    // cancels catastrophically
    std::vector<double> samples_;
};

AffineFitResult least_squares_affine_fit(const img::Image& raw, const img::Image& target,
                                         const std::vector<std::uint8_t>& mask = {});

} // namespace cfe::models

#pragma once

#include "nn/layers.hpp"

#include <functional>
#include <utility>

namespace cfe::nn {

struct GradCheckItem {
    std::string name;
    double max_rel_err = 0.0;
    int entries_checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckItem> items;
    double max_rel_err = 0.0;
};

// Compares analytic gradients of loss_fn against central finite differences.
//
// loss_fn is called with a tape for the analytic pass and with nullptr for the
// numeric probes; it must be deterministic (verified up front with two forward
// passes) and must read the given tensors through shared storage so in-place
// perturbations are visible. Relative error per entry is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport check_gradients(const std::function<Tensor(Tape*)>& loss_fn,
                                const std::vector<std::pair<std::string, Tensor>>& tensors,
                                double step, int max_entries_per_tensor, std::uint64_t seed);

} // namespace cfe::nn

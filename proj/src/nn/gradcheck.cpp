#include "nn/gradcheck.hpp"

#include "common/error.hpp"
#include "common/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace cfe::nn {

GradCheckReport check_gradients(const std::function<Tensor(Tape*)>& loss_fn,
                                const std::vector<std::pair<std::string, Tensor>>& tensors,
                                double step, int max_entries_per_tensor, std::uint64_t seed) {
    // two plain forwards must agree bit for bit
    const double probe1 = loss_fn(nullptr).item();
    const double probe2 = loss_fn(nullptr).item();
    if (std::memcmp(&probe1, &probe2, sizeof(double)) != 0)
        throw Error::numeric("gradient check: model function is not deterministic");

    for (const auto& [name, t] : tensors) {
        (void)name;
        if (!t.requires_grad())
            throw Error::usage("gradient check: tensor '" + name + "' does not require grad");
    }

    // one analytic pass
    std::vector<std::vector<double>> analytic;
    {
        for (const auto& [name, t] : tensors) {
            Tensor tt = t;
            tt.zero_grad();
        }
        Tape tape;
        Tensor loss = loss_fn(&tape);
        tape.backward(loss);
        for (const auto& [name, t] : tensors)
            analytic.push_back(std::vector<double>(t.grad(), t.grad() + t.numel()));
    }

    GradCheckReport report;
    Rng rng(seed ^ 0x5eedf00dULL);
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        const auto& [name, t] = tensors[ti];
        Tensor tt = t; // shares storage; used for in-place perturbation
        const std::size_t n = tt.numel();

        std::vector<std::size_t> entries;
        if (max_entries_per_tensor <= 0 || n <= static_cast<std::size_t>(max_entries_per_tensor)) {
            entries.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                entries[i] = i;
        } else {
            std::vector<std::size_t> perm = rng.permutation(n);
            entries.assign(perm.begin(), perm.begin() + max_entries_per_tensor);
            std::sort(entries.begin(), entries.end());
        }

        GradCheckItem item{name, 0.0, static_cast<int>(entries.size())};
        for (std::size_t e : entries) {
            double* slot = tt.data() + e;
            const double saved = *slot;
            *slot = saved + step;
            const double fp = loss_fn(nullptr).item();
            *slot = saved - step;
            const double fm = loss_fn(nullptr).item();
            *slot = saved;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[ti][e];
            const double rel =
                std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            item.max_rel_err = std::max(item.max_rel_err, rel);
        }
        report.max_rel_err = std::max(report.max_rel_err, item.max_rel_err);
        report.items.push_back(std::move(item));
    }
    return report;
}

} // namespace cfe::nn

#include "nn/sgd.hpp"

#include "common/error.hpp"

namespace cfe::nn {

void sgd_momentum_step(ParamStore& params, double lr, double momentum) {
    for (Parameter& p : params.params()) {
        if (!p.value.has_grad())
            throw Error::usage("sgd_momentum_step: parameter '" + p.name + "' has no gradient");
        double* v = p.value.data();
        double* g = p.value.grad();
        double* buf = p.momentum.data();
        const std::size_t n = p.value.numel();
        for (std::size_t i = 0; i < n; ++i) {
            buf[i] = momentum * buf[i] + g[i];
            v[i] -= lr * buf[i];
        }
        p.value.zero_grad();
    }
}

} // namespace cfe::nn

#pragma once

#include "nn/layers.hpp"

namespace cfe::nn {

// buffer <- momentum * buffer + grad; param <- param - lr * buffer.
// Gradients are zeroed afterwards so the next step starts clean.
void sgd_momentum_step(ParamStore& params, double lr, double momentum);

} // namespace cfe::nn

#include "nn/tape.hpp"

#include "common/error.hpp"

namespace cfe::nn {

void Tape::backward(Tensor& loss) {
    if (loss.numel() != 1)
        throw Error::usage("backward requires a scalar loss, got shape " + loss.shape().str());
    loss.ensure_grad();
    loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        (*it)();
}

} // namespace cfe::nn

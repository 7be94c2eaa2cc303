#pragma once

#include "nn/tensor.hpp"

#include <functional>
#include <vector>

namespace cfe::nn {

// Recorded computation graph. Nodes are appended in construction order and
// backward() replays them strictly in reverse, so gradient accumulation is
// additive by construction.
class Tape {
public:
    void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Seeds d(loss)/d(loss) = 1 and propagates. loss must be a scalar.
    // Calling twice without zeroing gradients accumulates, by contract.
    void backward(Tensor& loss);

private:
    std::vector<std::function<void()>> nodes_;
};

} // namespace cfe::nn

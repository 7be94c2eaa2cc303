#pragma once

#include "nn/layers.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cfe::train {

// Versioned binary container: little-endian header, then named 64-bit real
// arrays in model registration order. save -> load -> save round-trips byte
// for byte.
struct Checkpoint {
    std::uint32_t version = 1;
    std::string kind; // "cenet" | "prnet"
    std::uint64_t step = 0;
    std::string config_json; // exact snapshot, preserved verbatim
    struct Entry {
        std::string name;
        nn::Shape shape;
        bool trainable = false;
        std::vector<double> data;
        std::vector<double> momentum; // present iff trainable
    };
    std::vector<Entry> entries;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint snapshot_model(const std::string& kind, const nn::ParamStore& store,
                          std::uint64_t step, const std::string& config_json);

// Writes values and optimizer state back into a freshly built model; every
// name and shape must match the store exactly.
void restore_model(nn::ParamStore& store, const Checkpoint& ckpt);

} // namespace cfe::train

#pragma once

#include "imaging/image.hpp"
#include "train/config.hpp"

#include <string>
#include <vector>

namespace cfe::train {

struct ManifestEntry {
    std::string stem;
    std::string raw_path;
    std::string target_path;
    int width = 0;  // post-resize
    int height = 0; // post-resize
    std::string split; // "train" | "val"
};

struct DatasetManifest {
    int longer_edge = 0;
    int pad_size = 0;
    std::vector<ManifestEntry> entries; // sorted by stem

    std::vector<const ManifestEntry*> split(const std::string& tag) const;
};

// Pairs files by stem across the two directories (PNG or PPM), resizes to the
// longer edge, validates that raw/target dimensions agree, and assigns the
// train/val split. Ordering is deterministic: sorted stems.
DatasetManifest ingest_dataset(const std::string& raw_dir, const std::string& target_dir,
                               int longer_edge, int pad_size, int val_count,
                               const std::string& val_stems_file, std::uint64_t seed);

DatasetManifest ingest_from_config(const RunConfig& cfg);

// Line-oriented persistence: one tab-separated record per pair.
void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Fully preprocessed pair: resized, padded to S x S, padding zeroed.
struct LoadedPair {
    std::string stem;
    nn::Tensor raw;    // (1,3,S,S)
    nn::Tensor target; // (1,3,S,S)
    nn::Tensor mask3;  // (1,3,S,S) validity over channels
    std::vector<std::uint8_t> mask; // S*S
    int width = 0, height = 0;      // valid-region size
};

LoadedPair load_pair(const ManifestEntry& e, int longer_edge, int pad_size);

} // namespace cfe::train

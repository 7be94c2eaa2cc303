#pragma once

#include "models/cenet.hpp"
#include "models/prnet.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cfe::train {

// Defaults are the reference training recipe; desk-scale runs override them
// through the config file or --set flags.
struct TrainConfig {
    double lr_initial = 0.01;
    double lr_decay_factor = 0.1;
    long lr_decay_every_steps = 10000;
    double momentum = 0.9;
    int batch_size = 16;
    long epochs = 200;
    long max_steps = 0;              // 0 = no cap
    long checkpoint_every_steps = 0; // 0 = final checkpoint only
};

struct DatasetConfig {
    std::string raw_dir;
    std::string target_dir;
    int longer_edge = 500;
    int pad_size = 500;
    int val_count = 0;          // seeded random subset when no stems file given
    std::string val_stems_file; // optional explicit validation list
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_root = "runs";
    std::string checkpoint_dir; // consumed by evaluate/enhance-style commands
    std::string variant = "CE+PRNL";
    DatasetConfig dataset;
    TrainConfig train;
    models::CENetConfig cenet;
    models::PRNetConfig prnet;
    std::vector<std::string> ablation_variants{"CE", "PR", "PRNL", "CE+PR", "CE+PRNL"};
};

// Strict parse: unknown keys anywhere are rejected with the offending path.
RunConfig parse_config_text(const std::string& json_text);
RunConfig load_config(const std::string& path);

// Applies "dotted.key=value" overrides (CLI flags) on top of a parsed config;
// goes through the same validation as the file itself.
void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

std::string serialize_config(const RunConfig& cfg, bool pretty = false);
std::uint64_t config_hash(const RunConfig& cfg);

double lr_at_step(const TrainConfig& c, long step);

// Which networks a variant composes, per the five-way ablation definitions.
struct VariantSpec {
    std::string name;
    bool use_cenet = false;
    bool use_prnet = false;
    int prnet_residual_blocks = 3; // 18 for the PR variant
    bool prnet_use_nonlocal = false;
};

VariantSpec variant_spec(const std::string& name, const models::PRNetConfig& base);
models::PRNetConfig prnet_config_for_variant(const VariantSpec& v,
                                             const models::PRNetConfig& base);

} // namespace cfe::train

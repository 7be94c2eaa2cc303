#pragma once

#include "imaging/metrics.hpp"
#include "train/checkpoint.hpp"
#include "train/dataset.hpp"

#include <functional>

namespace cfe::train {

struct TrainLogRow {
    std::uint64_t step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainStageResult {
    std::uint64_t final_step = 0;
    double final_loss = 0.0;
    std::vector<TrainLogRow> log; // rows produced by this invocation
};

// r_p for arbitrary spatial sizes: inputs not divisible by 4 are zero-padded
// on the bottom/right for the network and the residual is cropped back.
nn::Tensor prnet_residual(models::PRNet& pr, nn::Tape* tape, const nn::Tensor& coarse,
                          bool training);

// The two stage objectives. Inputs are multiplied by the mask before entering
// the networks, so padded pixels cannot contribute to either loss.
nn::Tensor cenet_batch_loss(models::CENet& model, nn::Tape* tape, const nn::Tensor& raw,
                            const nn::Tensor& target, const nn::Tensor& mask3, bool training);
nn::Tensor prnet_batch_loss(models::PRNet& model, nn::Tape* tape, const nn::Tensor& coarse,
                            const nn::Tensor& residual_target, const nn::Tensor& mask3,
                            bool training);

// Channel-wise stage: minimizes the masked MSE between image + r_c and the
// target. Writes <out_dir>/cenet.ckpt and <out_dir>/cenet_loss.csv.
TrainStageResult train_cenet_stage(const RunConfig& cfg, const DatasetManifest& manifest,
                                   const std::string& out_dir, const std::string& resume_dir);

// Refinement stage: the frozen channel-wise model (when the variant has one)
// provides the coarse image; the network regresses the masked residual
// target. Writes <out_dir>/prnet.ckpt and <out_dir>/prnet_loss.csv.
TrainStageResult train_prnet_stage(const RunConfig& cfg, const DatasetManifest& manifest,
                                   const VariantSpec& variant, const std::string& cenet_ckpt,
                                   const std::string& out_dir, const std::string& resume_dir);

struct EvalRow {
    std::string stem;
    img::MetricsRecord metrics;
};

struct EvalResult {
    std::vector<EvalRow> rows;
    img::MetricsRecord mean;       // mean of per-image rows
    double lab_l2_pixel_pooled = 0.0; // same metric pooled over all valid pixels
};

// Composes the variant's output from checkpoints in checkpoint_dir, clamps,
// and evaluates all three metrics on the validation split (or on every entry
// when no split was assigned).
EvalResult evaluate_variant(const RunConfig& cfg, const DatasetManifest& manifest,
                            const VariantSpec& variant, const std::string& checkpoint_dir);

struct AblationRow {
    std::string variant;
    img::MetricsRecord mean;
};

std::string render_metrics_csv(const EvalResult& r);
std::string render_metrics_table(const EvalResult& r);
std::string render_ablation_csv(const std::vector<AblationRow>& rows);
std::string render_ablation_table(const std::vector<AblationRow>& rows);

// One configured invocation bound to a fresh run directory
// (<output_root>/<confighash>-<timestamp>). The CFE_OUTPUT_ROOT environment
// variable overrides output_root.
class Runner {
public:
    explicit Runner(RunConfig cfg);

    const RunConfig& config() const { return cfg_; }
    RunConfig& config() { return cfg_; }
    const std::string& run_dir();

    // Runs the variant's stages in order; returns a short summary.
    std::string train(const std::string& variant_override, const std::string& resume_dir);

    // Evaluates cfg.variant (or the override) against cfg.checkpoint_dir.
    std::string evaluate(const std::string& variant_override);

    // Trains and evaluates every ablation variant under identical seeds and
    // budgets; returns the rendered comparison table.
    std::string ablate();

    EvalResult last_eval() const { return last_eval_; }
    std::vector<AblationRow> last_ablation() const { return last_ablation_; }

private:
    RunConfig cfg_;
    std::string run_dir_;
    EvalResult last_eval_;
    std::vector<AblationRow> last_ablation_;
};

// Enhances images using checkpoints alone: the pad size and model layout come
// from the config snapshot stored in the checkpoint. Outputs are written as
// <out_dir>/<stem>_enhanced.png with the original dimensions restored.
std::vector<std::string> enhance_paths(const std::string& checkpoint_dir,
                                       const std::string& variant,
                                       const std::vector<std::string>& inputs,
                                       const std::string& out_dir);

} // namespace cfe::train

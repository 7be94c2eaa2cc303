#include "train/trainer.hpp"

#include "common/error.hpp"
#include "imaging/io.hpp"
#include "nn/sgd.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace cfe::train {

namespace {

constexpr std::uint64_t kCenetStream = 0x63656e6574ULL;  // model init streams
constexpr std::uint64_t kPrnetStream = 0x70726e6574ULL;
constexpr std::uint64_t kShuffleCenet = 0x73687566'6365ULL;
constexpr std::uint64_t kShufflePrnet = 0x73687566'7072ULL;

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_f9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f)
        throw Error::io("cannot write file: " + path);
    f << text;
    if (!f)
        throw Error::io("cannot write file: " + path);
}

nn::Tensor stack_rows(const std::vector<nn::Tensor>& per_image,
                      const std::vector<std::size_t>& indices) {
    const nn::Shape& s = per_image.front().shape();
    nn::Tensor out =
        nn::Tensor::zeros({static_cast<int>(indices.size()), s.c, s.h, s.w});
    const std::size_t row = s.numel();
    for (std::size_t i = 0; i < indices.size(); ++i)
        std::copy(per_image[indices[i]].data(), per_image[indices[i]].data() + row,
                  out.data() + i * row);
    return out;
}

struct PreppedData {
    std::vector<nn::Tensor> raw, target, mask3;
    std::vector<LoadedPair> pairs;
};

PreppedData load_split(const DatasetManifest& manifest, const std::string& tag) {
    PreppedData d;
    for (const ManifestEntry* e : manifest.split(tag)) {
        LoadedPair p = load_pair(*e, manifest.longer_edge, manifest.pad_size);
        d.raw.push_back(p.raw);
        d.target.push_back(p.target);
        d.mask3.push_back(p.mask3);
        d.pairs.push_back(std::move(p));
    }
    return d;
}

using BatchLossFn =
    std::function<nn::Tensor(nn::Tape*, const std::vector<std::size_t>&)>;

// Shared training loop: per-epoch counter-seeded shuffling, the step-decay
// schedule, CSV logging, periodic checkpoints and a divergence guard.
TrainStageResult run_loop(const RunConfig& cfg, nn::ParamStore& params,
                          const BatchLossFn& batch_loss, std::size_t train_count,
                          std::uint64_t shuffle_stream, std::uint64_t start_step,
                          const std::string& log_path,
                          const std::function<void(std::uint64_t)>& save_ckpt) {
    if (train_count == 0)
        throw Error::data("training split is empty");
    const long spe =
        static_cast<long>((train_count + cfg.train.batch_size - 1) / cfg.train.batch_size);
    long total = cfg.train.epochs * spe;
    if (cfg.train.max_steps > 0)
        total = std::min(total, cfg.train.max_steps);

    std::ofstream log(log_path, std::ios::trunc);
    if (!log)
        throw Error::io("cannot write loss log: " + log_path);
    log << "step,lr,loss\n";

    TrainStageResult res;
    res.final_step = start_step;
    std::uint64_t step = start_step;
    while (step < static_cast<std::uint64_t>(total)) {
        const long epoch = static_cast<long>(step / spe);
        const long offset = static_cast<long>(step % spe);
        const auto perm =
            Rng::derive(cfg.seed, shuffle_stream, static_cast<std::uint64_t>(epoch))
                .permutation(train_count);
        for (long b = offset; b < spe && step < static_cast<std::uint64_t>(total); ++b) {
            const std::size_t lo = static_cast<std::size_t>(b) * cfg.train.batch_size;
            const std::size_t hi = std::min(train_count, lo + cfg.train.batch_size);
            std::vector<std::size_t> indices(perm.begin() + lo, perm.begin() + hi);

            const double lr = lr_at_step(cfg.train, static_cast<long>(step));
            nn::Tape tape;
            nn::Tensor loss = batch_loss(&tape, indices);
            const double lv = loss.item();
            if (!std::isfinite(lv))
                throw Error::numeric("training diverged: non-finite loss at step " +
                                     std::to_string(step));
            tape.backward(loss);
            nn::sgd_momentum_step(params, lr, cfg.train.momentum);

            log << step << ',' << fmt_g17(lr) << ',' << fmt_g17(lv) << '\n';
            res.log.push_back(TrainLogRow{step, lr, lv});
            res.final_loss = lv;
            ++step;
            if (cfg.train.checkpoint_every_steps > 0 &&
                step % static_cast<std::uint64_t>(cfg.train.checkpoint_every_steps) == 0)
                save_ckpt(step);
        }
    }
    res.final_step = step;
    save_ckpt(step);
    if (!log)
        throw Error::io("cannot write loss log: " + log_path);
    return res;
}

models::CENet build_cenet(const RunConfig& cfg) {
    Rng rng = Rng::derive(cfg.seed, kCenetStream);
    return models::CENet(cfg.cenet, rng);
}

models::PRNet build_prnet(const RunConfig& cfg, const VariantSpec& variant) {
    Rng rng = Rng::derive(cfg.seed, kPrnetStream);
    return models::PRNet(prnet_config_for_variant(variant, cfg.prnet), rng);
}

} // namespace

nn::Tensor prnet_residual(models::PRNet& pr, nn::Tape* tape, const nn::Tensor& coarse,
                          bool training) {
    const nn::Shape& s = coarse.shape();
    const int H = (s.h + 3) / 4 * 4;
    const int W = (s.w + 3) / 4 * 4;
    if (H == s.h && W == s.w)
        return pr.forward(tape, coarse, training);
    nn::Tensor padded = nn::pad_spatial(tape, coarse, H, W);
    nn::Tensor r = pr.forward(tape, padded, training);
    return nn::crop_spatial(tape, r, s.h, s.w);
}

nn::Tensor cenet_batch_loss(models::CENet& model, nn::Tape* tape, const nn::Tensor& raw,
                            const nn::Tensor& target, const nn::Tensor& mask3, bool training) {
    // padding is re-zeroed here so stray values outside the valid region can
    // never leak into the loss
    nn::Tensor pred = model.enhance(tape, nn::mul(tape, raw, mask3), training);
    return nn::mse_loss(tape, pred, target, mask3);
}

nn::Tensor prnet_batch_loss(models::PRNet& model, nn::Tape* tape, const nn::Tensor& coarse,
                            const nn::Tensor& residual_target, const nn::Tensor& mask3,
                            bool training) {
    nn::Tensor rp = prnet_residual(model, tape, nn::mul(tape, coarse, mask3), training);
    return nn::mse_loss(tape, rp, residual_target, mask3);
}

TrainStageResult train_cenet_stage(const RunConfig& cfg, const DatasetManifest& manifest,
                                   const std::string& out_dir, const std::string& resume_dir) {
    PreppedData data = load_split(manifest, "train");
    models::CENet model = build_cenet(cfg);

    std::uint64_t start_step = 0;
    if (!resume_dir.empty()) {
        const std::string prev = (fs::path(resume_dir) / "cenet.ckpt").string();
        if (!fs::exists(prev))
            throw Error::data("resume requested but checkpoint missing: " + prev);
        Checkpoint ckpt = load_checkpoint(prev);
        restore_model(model.params(), ckpt);
        start_step = ckpt.step;
    }

    const std::string ckpt_path = (fs::path(out_dir) / "cenet.ckpt").string();
    const std::string config_json = serialize_config(cfg);
    auto save = [&](std::uint64_t step) {
        save_checkpoint(snapshot_model("cenet", model.params(), step, config_json), ckpt_path);
    };

    BatchLossFn loss_fn = [&](nn::Tape* tape, const std::vector<std::size_t>& idx) {
        nn::Tensor x = stack_rows(data.raw, idx);
        nn::Tensor t = stack_rows(data.target, idx);
        nn::Tensor m = stack_rows(data.mask3, idx);
        return cenet_batch_loss(model, tape, x, t, m, /*training=*/true);
    };

    return run_loop(cfg, model.params(), loss_fn, data.raw.size(), kShuffleCenet, start_step,
                    (fs::path(out_dir) / "cenet_loss.csv").string(), save);
}

TrainStageResult train_prnet_stage(const RunConfig& cfg, const DatasetManifest& manifest,
                                   const VariantSpec& variant, const std::string& cenet_ckpt,
                                   const std::string& out_dir, const std::string& resume_dir) {
    PreppedData data = load_split(manifest, "train");
    models::PRNet model = build_prnet(cfg, variant);

    // Frozen coarse stage: with a channel-wise model the coarse image is fixed
    // for the whole stage, so it is computed once per image, gradient-free.
    std::optional<models::CENet> cenet;
    if (variant.use_cenet) {
        if (cenet_ckpt.empty() || !fs::exists(cenet_ckpt))
            throw Error::data("variant " + variant.name +
                              " requires a channel-wise checkpoint, missing: " + cenet_ckpt);
        cenet.emplace(build_cenet(cfg));
        restore_model(cenet->params(), load_checkpoint(cenet_ckpt));
    }

    std::vector<nn::Tensor> coarse(data.raw.size());
    std::vector<nn::Tensor> residual_target(data.raw.size());
    for (std::size_t i = 0; i < data.raw.size(); ++i) {
        nn::Tensor c =
            cenet ? cenet->enhance(nullptr, data.raw[i], /*training=*/false) : data.raw[i];
        // zero the padded region: the refinement input must not carry the
        // channel-wise bias outside the valid area
        coarse[i] = nn::mul(nullptr, c, data.mask3[i]);
        nn::Tensor r = nn::Tensor::zeros(coarse[i].shape());
        const double* t = data.target[i].data();
        const double* cd = coarse[i].data();
        double* rd = r.data();
        for (std::size_t j = 0; j < r.numel(); ++j)
            rd[j] = t[j] - cd[j];
        residual_target[i] = r;
    }

    std::uint64_t start_step = 0;
    if (!resume_dir.empty()) {
        const std::string prev = (fs::path(resume_dir) / "prnet.ckpt").string();
        if (!fs::exists(prev))
            throw Error::data("resume requested but checkpoint missing: " + prev);
        Checkpoint ckpt = load_checkpoint(prev);
        restore_model(model.params(), ckpt);
        start_step = ckpt.step;
    }

    const std::string ckpt_path = (fs::path(out_dir) / "prnet.ckpt").string();
    const std::string config_json = serialize_config(cfg);
    auto save = [&](std::uint64_t step) {
        save_checkpoint(snapshot_model("prnet", model.params(), step, config_json), ckpt_path);
    };

    BatchLossFn loss_fn = [&](nn::Tape* tape, const std::vector<std::size_t>& idx) {
        nn::Tensor c = stack_rows(coarse, idx);
        nn::Tensor r = stack_rows(residual_target, idx);
        nn::Tensor m = stack_rows(data.mask3, idx);
        return prnet_batch_loss(model, tape, c, r, m, /*training=*/true);
    };

    return run_loop(cfg, model.params(), loss_fn, data.raw.size(), kShufflePrnet, start_step,
                    (fs::path(out_dir) / "prnet_loss.csv").string(), save);
}

namespace {

struct ComposedModels {
    std::optional<models::CENet> cenet;
    std::optional<models::PRNet> prnet;
};

ComposedModels load_models(const RunConfig& cfg, const VariantSpec& variant,
                           const std::string& checkpoint_dir) {
    ComposedModels m;
    if (variant.use_cenet) {
        const std::string path = (fs::path(checkpoint_dir) / "cenet.ckpt").string();
        if (!fs::exists(path))
            throw Error::data("missing checkpoint: " + path);
        m.cenet.emplace(build_cenet(cfg));
        restore_model(m.cenet->params(), load_checkpoint(path));
    }
    if (variant.use_prnet) {
        const std::string path = (fs::path(checkpoint_dir) / "prnet.ckpt").string();
        if (!fs::exists(path))
            throw Error::data("missing checkpoint: " + path);
        m.prnet.emplace(build_prnet(cfg, variant));
        restore_model(m.prnet->params(), load_checkpoint(path));
    }
    return m;
}

nn::Tensor compose_output(const VariantSpec& variant, ComposedModels& m, const nn::Tensor& raw,
                          const nn::Tensor& mask3) {
    nn::Tensor coarse =
        variant.use_cenet ? m.cenet->enhance(nullptr, raw, /*training=*/false) : raw;
    if (!variant.use_prnet)
        return coarse;
    // the refinement network sees the same masked coarse image as in training
    nn::Tensor rp =
        prnet_residual(*m.prnet, nullptr, nn::mul(nullptr, coarse, mask3), /*training=*/false);
    return nn::add(nullptr, coarse, rp);
}

} // namespace

EvalResult evaluate_variant(const RunConfig& cfg, const DatasetManifest& manifest,
                            const VariantSpec& variant, const std::string& checkpoint_dir) {
    ComposedModels m = load_models(cfg, variant, checkpoint_dir);

    std::vector<const ManifestEntry*> entries = manifest.split("val");
    if (entries.empty()) {
        for (const ManifestEntry& e : manifest.entries)
            entries.push_back(&e);
    }
    if (entries.empty())
        throw Error::data("nothing to evaluate: manifest is empty");

    EvalResult res;
    double pooled_lab_sum = 0.0;
    std::size_t pooled_pixels = 0;
    for (const ManifestEntry* e : entries) {
        LoadedPair p = load_pair(*e, manifest.longer_edge, manifest.pad_size);
        nn::Tensor out = compose_output(variant, m, p.raw, p.mask3);

        img::PaddedImage padded;
        padded.image = img::tensor_to_image(out);
        padded.mask = p.mask;
        padded.original_width = p.width;
        padded.original_height = p.height;
        const img::Image enhanced = img::clamp01(img::unpad(padded));

        img::PaddedImage tgt_padded;
        tgt_padded.image = img::tensor_to_image(p.target);
        tgt_padded.mask = p.mask;
        tgt_padded.original_width = p.width;
        tgt_padded.original_height = p.height;
        const img::Image target = img::unpad(tgt_padded);

        EvalRow row{e->stem, img::compute_metrics(enhanced, target)};
        pooled_lab_sum += row.metrics.lab_l2 * static_cast<double>(p.width) * p.height;
        pooled_pixels += static_cast<std::size_t>(p.width) * p.height;
        res.rows.push_back(std::move(row));
    }
    for (const EvalRow& r : res.rows) {
        res.mean.lab_l2 += r.metrics.lab_l2;
        res.mean.psnr += r.metrics.psnr;
        res.mean.ssim += r.metrics.ssim;
    }
    const double n = static_cast<double>(res.rows.size());
    res.mean.lab_l2 /= n;
    res.mean.psnr /= n;
    res.mean.ssim /= n;
    res.lab_l2_pixel_pooled = pooled_lab_sum / static_cast<double>(pooled_pixels);
    return res;
}

std::string render_metrics_csv(const EvalResult& r) {
    std::ostringstream os;
    os << "stem,lab_l2,psnr,ssim\n";
    for (const EvalRow& row : r.rows)
        os << row.stem << ',' << fmt_f9(row.metrics.lab_l2) << ',' << fmt_f9(row.metrics.psnr)
           << ',' << fmt_f9(row.metrics.ssim) << '\n';
    os << "mean," << fmt_f9(r.mean.lab_l2) << ',' << fmt_f9(r.mean.psnr) << ','
       << fmt_f9(r.mean.ssim) << '\n';
    return os.str();
}

std::string render_metrics_table(const EvalResult& r) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-24s %15s %15s %15s\n", "image", "L2 (LAB)", "PSNR",
                  "SSIM");
    os << buf;
    for (const EvalRow& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%-24s %15.9f %15.9f %15.9f\n", row.stem.c_str(),
                      row.metrics.lab_l2, row.metrics.psnr, row.metrics.ssim);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "%-24s %15.9f %15.9f %15.9f\n", "mean", r.mean.lab_l2,
                  r.mean.psnr, r.mean.ssim);
    os << buf;
    std::snprintf(buf, sizeof buf, "per-pixel pooled L2 (LAB): %.9f\n", r.lab_l2_pixel_pooled);
    os << buf;
    return os.str();
}

std::string render_ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "variant,lab_l2,psnr,ssim\n";
    for (const AblationRow& r : rows)
        os << r.variant << ',' << fmt_f9(r.mean.lab_l2) << ',' << fmt_f9(r.mean.psnr) << ','
           << fmt_f9(r.mean.ssim) << '\n';
    return os.str();
}

std::string render_ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %15s %15s %15s\n", "method", "L2 (LAB)", "PSNR",
                  "SSIM");
    os << buf;
    for (const AblationRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%-10s %15.9f %15.9f %15.9f\n", r.variant.c_str(),
                      r.mean.lab_l2, r.mean.psnr, r.mean.ssim);
        os << buf;
    }
    return os.str();
}

Runner::Runner(RunConfig cfg) : cfg_(std::move(cfg)) {
    if (const char* root = std::getenv("CFE_OUTPUT_ROOT"); root && *root)
        cfg_.output_root = root;
}

const std::string& Runner::run_dir() {
    if (!run_dir_.empty())
        return run_dir_;
    char hash[24];
    std::snprintf(hash, sizeof hash, "%08" PRIx64,
                  config_hash(cfg_) & 0xffffffffULL);
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm_utc);

    std::string base = (fs::path(cfg_.output_root) / (std::string(hash) + "-" + stamp)).string();
    std::string candidate = base;
    for (int k = 1; fs::exists(candidate); ++k)
        candidate = base + "-" + std::to_string(k);
    fs::create_directories(candidate);
    run_dir_ = candidate;
    write_text_file((fs::path(run_dir_) / "config.json").string(),
                    serialize_config(cfg_, /*pretty=*/true) + "\n");
    return run_dir_;
}

std::string Runner::train(const std::string& variant_override, const std::string& resume_dir) {
    const std::string name = variant_override.empty() ? cfg_.variant : variant_override;
    const VariantSpec variant = variant_spec(name, cfg_.prnet);
    const std::string& dir = run_dir();

    DatasetManifest manifest = ingest_from_config(cfg_);
    save_manifest(manifest, (fs::path(dir) / "manifest.tsv").string());

    std::ostringstream summary;
    summary << "run_dir: " << dir << "\nvariant: " << variant.name << "\n";
    if (variant.use_cenet) {
        TrainStageResult r = train_cenet_stage(cfg_, manifest, dir, resume_dir);
        summary << "cenet: steps=" << r.final_step << " final_loss=" << fmt_g17(r.final_loss)
                << "\n";
    }
    if (variant.use_prnet) {
        const std::string cenet_ckpt =
            variant.use_cenet ? (fs::path(dir) / "cenet.ckpt").string() : std::string();
        TrainStageResult r =
            train_prnet_stage(cfg_, manifest, variant, cenet_ckpt, dir, resume_dir);
        summary << "prnet: steps=" << r.final_step << " final_loss=" << fmt_g17(r.final_loss)
                << "\n";
    }
    return summary.str();
}

std::string Runner::evaluate(const std::string& variant_override) {
    const std::string name = variant_override.empty() ? cfg_.variant : variant_override;
    const VariantSpec variant = variant_spec(name, cfg_.prnet);
    if (cfg_.checkpoint_dir.empty())
        throw Error::config("evaluate requires checkpoint_dir to be set");

    DatasetManifest manifest = ingest_from_config(cfg_);
    last_eval_ = evaluate_variant(cfg_, manifest, variant, cfg_.checkpoint_dir);

    const std::string& dir = run_dir();
    write_text_file((fs::path(dir) / "metrics.csv").string(), render_metrics_csv(last_eval_));
    const std::string table = render_metrics_table(last_eval_);
    write_text_file((fs::path(dir) / "metrics.txt").string(), table);
    return table;
}

std::string Runner::ablate() {
    if (cfg_.ablation_variants.empty())
        throw Error::config("ablation.variants must not be empty");
    const std::string& dir = run_dir();

    DatasetManifest manifest = ingest_from_config(cfg_);
    save_manifest(manifest, (fs::path(dir) / "manifest.tsv").string());

    last_ablation_.clear();
    for (const std::string& name : cfg_.ablation_variants) {
        const VariantSpec variant = variant_spec(name, cfg_.prnet);
        const std::string vdir = (fs::path(dir) / "ablation" / variant.name).string();
        fs::create_directories(vdir);
        if (variant.use_cenet)
            train_cenet_stage(cfg_, manifest, vdir, "");
        if (variant.use_prnet) {
            const std::string cenet_ckpt =
                variant.use_cenet ? (fs::path(vdir) / "cenet.ckpt").string() : std::string();
            train_prnet_stage(cfg_, manifest, variant, cenet_ckpt, vdir, "");
        }
        EvalResult ev = evaluate_variant(cfg_, manifest, variant, vdir);
        write_text_file((fs::path(vdir) / "metrics.csv").string(), render_metrics_csv(ev));
        last_ablation_.push_back(AblationRow{variant.name, ev.mean});
    }

    write_text_file((fs::path(dir) / "ablation.csv").string(),
                    render_ablation_csv(last_ablation_));
    const std::string table = render_ablation_table(last_ablation_);
    write_text_file((fs::path(dir) / "ablation.txt").string(), table);
    return table;
}

std::vector<std::string> enhance_paths(const std::string& checkpoint_dir,
                                       const std::string& variant_name,
                                       const std::vector<std::string>& inputs,
                                       const std::string& out_dir) {
    // model layout and pad size come from the snapshot inside the checkpoint
    std::string config_json;
    {
        const fs::path ce = fs::path(checkpoint_dir) / "cenet.ckpt";
        const fs::path pr = fs::path(checkpoint_dir) / "prnet.ckpt";
        if (fs::exists(ce))
            config_json = load_checkpoint(ce.string()).config_json;
        else if (fs::exists(pr))
            config_json = load_checkpoint(pr.string()).config_json;
        else
            throw Error::data("no checkpoints found in: " + checkpoint_dir);
    }
    RunConfig cfg = parse_config_text(config_json);
    const VariantSpec variant =
        variant_spec(variant_name.empty() ? cfg.variant : variant_name, cfg.prnet);
    ComposedModels m = load_models(cfg, variant, checkpoint_dir);

    fs::create_directories(out_dir);
    std::vector<std::string> written;
    for (const std::string& in_path : inputs) {
        const img::Image raw = img::load_image(in_path);
        if (raw.width > cfg.dataset.pad_size || raw.height > cfg.dataset.pad_size)
            throw Error::data("image exceeds the pad limit of " +
                              std::to_string(cfg.dataset.pad_size) + ": " + in_path);
        img::PaddedImage padded = img::pad_to_square(raw, cfg.dataset.pad_size);
        nn::Tensor out = compose_output(variant, m, img::image_to_tensor(padded.image),
                                        img::mask_to_tensor3(padded));

        img::PaddedImage result;
        result.image = img::tensor_to_image(out);
        result.mask = padded.mask;
        result.original_width = raw.width;
        result.original_height = raw.height;

        const std::string stem = fs::path(in_path).stem().string();
        const std::string out_path = (fs::path(out_dir) / (stem + "_enhanced.png")).string();
        img::save_image(img::clamp01(img::unpad(result)), out_path);
        written.push_back(out_path);
    }
    return written;
}

} // namespace cfe::train

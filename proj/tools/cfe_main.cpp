// Command-line front end; everything goes through the public C API.

#include <cfe/cfe.h>

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace {

struct RunHandle {
    cfe_run* run = nullptr;
    ~RunHandle() { cfe_run_close(run); }
};

int fail(cfe_status st) {
    std::fprintf(stderr, "error: %s\n", cfe_last_error());
    return static_cast<int>(st);
}

void print_owned(char* s) {
    if (s) {
        std::fputs(s, stdout);
        cfe_string_free(s);
    }
}

int open_run(const std::string& config_path, const std::vector<std::string>& sets,
             const std::string& seed, RunHandle& h) {
    cfe_status st = cfe_run_open(config_path.c_str(), &h.run);
    if (st != CFE_OK)
        return fail(st);
    for (const std::string& kv : sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return static_cast<int>(CFE_ERR_USAGE);
        }
        st = cfe_run_set(h.run, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (st != CFE_OK)
            return fail(st);
    }
    if (!seed.empty()) {
        st = cfe_run_set(h.run, "seed", seed.c_str());
        if (st != CFE_OK)
            return fail(st);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"coarse-to-fine automatic color enhancement"};
    app.require_subcommand(1);

    std::string config_path, variant, resume_dir, seed;
    std::vector<std::string> sets;

    auto add_config_opts = [&](CLI::App* cmd, bool with_variant) {
        cmd->add_option("config", config_path, "run config (JSON)")->required();
        cmd->add_option("--set", sets, "override a config key (key=value)");
        cmd->add_option("--seed", seed, "override the run seed");
        if (with_variant)
            cmd->add_option("--variant", variant, "CE, PR, PRNL, CE+PR or CE+PRNL");
    };

    CLI::App* cmd_train = app.add_subcommand("train", "train the selected variant");
    add_config_opts(cmd_train, true);
    cmd_train->add_option("--resume", resume_dir, "run directory to resume from");

    CLI::App* cmd_evaluate = app.add_subcommand("evaluate", "evaluate checkpoints");
    add_config_opts(cmd_evaluate, true);
    std::string checkpoint_dir_flag;
    cmd_evaluate->add_option("--checkpoint-dir", checkpoint_dir_flag,
                             "directory holding cenet.ckpt/prnet.ckpt");

    CLI::App* cmd_ablate = app.add_subcommand("ablate", "run the ablation comparison");
    add_config_opts(cmd_ablate, false);

    CLI::App* cmd_enhance = app.add_subcommand("enhance", "enhance images from checkpoints");
    std::string enh_ckpt_dir, enh_out_dir, enh_variant;
    std::vector<std::string> enh_inputs;
    cmd_enhance->add_option("--checkpoint-dir", enh_ckpt_dir, "trained run directory")
        ->required();
    cmd_enhance->add_option("--variant", enh_variant, "variant the checkpoints belong to");
    cmd_enhance->add_option("--out-dir", enh_out_dir, "output directory")->required();
    cmd_enhance->add_option("inputs", enh_inputs, "input images (PNG or PPM)")->required();

    CLI::App* cmd_gradcheck = app.add_subcommand("gradcheck", "verify analytic gradients");
    std::string scope = "op";
    cmd_gradcheck->add_option("--scope", scope, "op, cenet, prnet or full");

    CLI11_PARSE(app, argc, argv);

    if (cmd_train->parsed()) {
        RunHandle h;
        if (int rc = open_run(config_path, sets, seed, h))
            return rc;
        char* summary = nullptr;
        const cfe_status st = cfe_run_train(h.run, variant.empty() ? nullptr : variant.c_str(),
                                            resume_dir.empty() ? nullptr : resume_dir.c_str(),
                                            &summary);
        if (st != CFE_OK)
            return fail(st);
        print_owned(summary);
        return 0;
    }

    if (cmd_evaluate->parsed()) {
        RunHandle h;
        if (int rc = open_run(config_path, sets, seed, h))
            return rc;
        if (!checkpoint_dir_flag.empty()) {
            const cfe_status st =
                cfe_run_set(h.run, "checkpoint_dir", checkpoint_dir_flag.c_str());
            if (st != CFE_OK)
                return fail(st);
        }
        char* table = nullptr;
        const cfe_status st =
            cfe_run_evaluate(h.run, variant.empty() ? nullptr : variant.c_str(), &table);
        if (st != CFE_OK)
            return fail(st);
        print_owned(table);
        return 0;
    }

    if (cmd_ablate->parsed()) {
        RunHandle h;
        if (int rc = open_run(config_path, sets, seed, h))
            return rc;
        char* table = nullptr;
        const cfe_status st = cfe_run_ablate(h.run, &table);
        if (st != CFE_OK)
            return fail(st);
        print_owned(table);
        return 0;
    }

    if (cmd_enhance->parsed()) {
        std::vector<const char*> paths;
        paths.reserve(enh_inputs.size());
        for (const std::string& p : enh_inputs)
            paths.push_back(p.c_str());
        const cfe_status st =
            cfe_enhance(enh_ckpt_dir.c_str(), enh_variant.empty() ? nullptr : enh_variant.c_str(),
                        paths.data(), paths.size(), enh_out_dir.c_str());
        if (st != CFE_OK)
            return fail(st);
        std::printf("enhanced %zu image(s) into %s\n", paths.size(), enh_out_dir.c_str());
        return 0;
    }

    if (cmd_gradcheck->parsed()) {
        char* report = nullptr;
        double max_err = 0.0;
        const cfe_status st = cfe_gradcheck(scope.c_str(), &report, &max_err);
        print_owned(report);
        if (st != CFE_OK)
            return fail(st);
        return 0;
    }

    return static_cast<int>(CFE_ERR_USAGE);
}

#include "cfe/cfe.h"

#include "common/error.hpp"
#include "train/gradcheck_suites.hpp"
#include "train/trainer.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

using cfe::Error;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(::malloc(s.size() + 1));
    if (out)
        std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

cfe_status status_from(const Error& e) { return static_cast<cfe_status>(e.code()); }

template <typename Fn>
cfe_status guard(Fn&& fn) {
    try {
        fn();
        return CFE_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_from(e);
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return CFE_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CFE_ERR_INTERNAL;
    }
}

} // namespace

struct cfe_run {
    cfe::train::Runner runner;
};

extern "C" {

const char* cfe_version(void) { return "1.0.0"; }

const char* cfe_last_error(void) { return g_last_error.c_str(); }

void cfe_string_free(char* s) { ::free(s); }

cfe_status cfe_run_open(const char* config_path, cfe_run** out_run) {
    if (!config_path || !out_run) {
        g_last_error = "cfe_run_open: null argument";
        return CFE_ERR_USAGE;
    }
    *out_run = nullptr;
    return guard([&] {
        cfe::train::RunConfig cfg = cfe::train::load_config(config_path);
        *out_run = new cfe_run{cfe::train::Runner(std::move(cfg))};
    });
}

cfe_status cfe_run_set(cfe_run* run, const char* dotted_key, const char* value) {
    if (!run || !dotted_key || !value) {
        g_last_error = "cfe_run_set: null argument";
        return CFE_ERR_USAGE;
    }
    return guard([&] { cfe::train::apply_override(run->runner.config(), dotted_key, value); });
}

cfe_status cfe_run_dir(cfe_run* run, char** out_dir) {
    if (!run || !out_dir) {
        g_last_error = "cfe_run_dir: null argument";
        return CFE_ERR_USAGE;
    }
    return guard([&] { *out_dir = dup_string(run->runner.run_dir()); });
}

void cfe_run_close(cfe_run* run) { delete run; }

cfe_status cfe_run_train(cfe_run* run, const char* variant, const char* resume_dir,
                         char** out_summary) {
    if (!run) {
        g_last_error = "cfe_run_train: null run";
        return CFE_ERR_USAGE;
    }
    return guard([&] {
        const std::string summary =
            run->runner.train(variant ? variant : "", resume_dir ? resume_dir : "");
        if (out_summary)
            *out_summary = dup_string(summary);
    });
}

cfe_status cfe_run_evaluate(cfe_run* run, const char* variant, char** out_table) {
    if (!run) {
        g_last_error = "cfe_run_evaluate: null run";
        return CFE_ERR_USAGE;
    }
    return guard([&] {
        const std::string table = run->runner.evaluate(variant ? variant : "");
        if (out_table)
            *out_table = dup_string(table);
    });
}

cfe_status cfe_run_ablate(cfe_run* run, char** out_table) {
    if (!run) {
        g_last_error = "cfe_run_ablate: null run";
        return CFE_ERR_USAGE;
    }
    return guard([&] {
        const std::string table = run->runner.ablate();
        if (out_table)
            *out_table = dup_string(table);
    });
}

cfe_status cfe_enhance(const char* checkpoint_dir, const char* variant,
                       const char* const* input_paths, size_t input_count,
                       const char* out_dir) {
    if (!checkpoint_dir || !input_paths || input_count == 0 || !out_dir) {
        g_last_error = "cfe_enhance: null or empty argument";
        return CFE_ERR_USAGE;
    }
    return guard([&] {
        std::vector<std::string> inputs(input_paths, input_paths + input_count);
        cfe::train::enhance_paths(checkpoint_dir, variant ? variant : "", inputs, out_dir);
    });
}

cfe_status cfe_gradcheck(const char* scope, char** out_report, double* out_max_rel_err) {
    if (!scope) {
        g_last_error = "cfe_gradcheck: null scope";
        return CFE_ERR_USAGE;
    }
    cfe::train::ScopeReport report;
    const cfe_status st = guard([&] { report = cfe::train::run_gradcheck_scope(scope); });
    if (st != CFE_OK)
        return st;
    if (out_report)
        *out_report = dup_string(cfe::train::render_gradcheck_report(report));
    if (out_max_rel_err)
        *out_max_rel_err = report.max_rel_err;
    if (!report.passed()) {
        g_last_error = "gradient check failed for scope " + std::string(scope);
        return CFE_ERR_NUMERIC;
    }
    return CFE_OK;
}

} // extern "C"

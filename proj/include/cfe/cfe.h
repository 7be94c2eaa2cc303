/* C interface to the coarse-to-fine color enhancement library.
 *
 * All functions return cfe_status; 0 is success and nonzero values identify
 * the failure class (they double as CLI exit codes). On failure,
 * cfe_last_error() returns a thread-local human-readable message. Strings
 * returned through char** out-parameters are heap-allocated and must be
 * released with cfe_string_free().
 */
#ifndef CFE_H
#define CFE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cfe_status {
    CFE_OK = 0,
    CFE_ERR_INTERNAL = 1,
    CFE_ERR_CONFIG = 2,  /* bad config file, unknown key, invalid value */
    CFE_ERR_DATA = 3,    /* dataset, image or checkpoint problems */
    CFE_ERR_NUMERIC = 4, /* divergence, failed numeric verification */
    CFE_ERR_IO = 5,      /* filesystem failures */
    CFE_ERR_USAGE = 6    /* invalid arguments or call sequence */
} cfe_status;

const char* cfe_version(void);
const char* cfe_last_error(void);
void cfe_string_free(char* s);

/* A configured run bound to a fresh output directory under the config's
 * output_root (overridable with the CFE_OUTPUT_ROOT environment variable). */
typedef struct cfe_run cfe_run;

cfe_status cfe_run_open(const char* config_path, cfe_run** out_run);

/* Override one config key ("train.epochs", "12") before the first command.
 * Values are parsed as JSON when possible, otherwise taken as strings. */
cfe_status cfe_run_set(cfe_run* run, const char* dotted_key, const char* value);

/* Resolved per-run output directory (created on first use). */
cfe_status cfe_run_dir(cfe_run* run, char** out_dir);

void cfe_run_close(cfe_run* run);

/* Trains the variant's stages in order (channel-wise first when present),
 * writing checkpoints and step/lr/loss CSV logs into the run directory.
 * variant: CE, PR, PRNL, CE+PR, CE+PRNL or NULL for the config's variant.
 * resume_dir: previous run directory to continue from, or NULL. */
cfe_status cfe_run_train(cfe_run* run, const char* variant, const char* resume_dir,
                         char** out_summary);

/* Evaluates checkpoint_dir (from the config or a prior override) on the
 * validation split; writes metrics.csv/metrics.txt and returns the table. */
cfe_status cfe_run_evaluate(cfe_run* run, const char* variant, char** out_table);

/* Trains and evaluates every configured ablation variant under identical
 * seeds and budgets; returns the comparison table. */
cfe_status cfe_run_ablate(cfe_run* run, char** out_table);

/* Enhances images using the checkpoints in checkpoint_dir; model layout and
 * pad size come from the checkpoint's embedded config snapshot. Writes
 * <stem>_enhanced.png files into out_dir. */
cfe_status cfe_enhance(const char* checkpoint_dir, const char* variant,
                       const char* const* input_paths, size_t input_count,
                       const char* out_dir);

/* Finite-difference verification of the analytic gradients.
 * scope: "op", "cenet", "prnet" or "full". Returns CFE_ERR_NUMERIC when any
 * parameter exceeds its tolerance; the rendered report lists every parameter
 * checked. */
cfe_status cfe_gradcheck(const char* scope, char** out_report, double* out_max_rel_err);

#ifdef __cplusplus
}
#endif

#endif /* CFE_H */

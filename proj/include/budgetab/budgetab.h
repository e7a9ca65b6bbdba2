#ifndef BUDGETAB_H
#define BUDGETAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(BUDGETAB_BUILDING)
#    define BAB_API __declspec(dllexport)
#  else
#    define BAB_API __declspec(dllimport)
#  endif
#else
#  define BAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define BAB_ABI_VERSION 1u

/* Status codes. The numeric values of CONFIG, IO and SOLVER double as the
 * command-line exit codes. */
typedef enum bab_status {
    BAB_OK = 0,
    BAB_ERR_INVALID_ARGUMENT = 1,
    BAB_ERR_CONFIG = 2,
    BAB_ERR_IO = 3,
    BAB_ERR_SOLVER = 4,
    BAB_ERR_INTERNAL = 5
} bab_status;

typedef struct bab_instance bab_instance;
typedef struct bab_design bab_design;

/* Called after each finished unit of sweep work. */
typedef void (*bab_progress_fn)(size_t done, size_t total, void* user);
/* Called after each online step; sampled is -1 when the item aborted. */
typedef void (*bab_step_fn)(size_t step, int sampled, int feasible, double spend, void* user);

BAB_API uint32_t bab_abi_version(void);
BAB_API const char* bab_version_string(void);

/* Message of the last failed call on this thread ("" if none). */
BAB_API const char* bab_last_error(void);

/* Frees strings returned through char** out-parameters. */
BAB_API void bab_string_free(char* s);

/* ---- instances ------------------------------------------------------- */

/* config_json: {n, r1, r2, r3, mode}; other simulation keys are accepted
 * and ignored. */
BAB_API bab_status bab_instance_generate(const char* config_json, uint64_t seed, bab_instance** out);
BAB_API bab_status bab_instance_from_json(const char* json, bab_instance** out);
BAB_API bab_status bab_instance_load(const char* path, bab_instance** out);
BAB_API bab_status bab_instance_save(const bab_instance* inst, const char* path);
BAB_API bab_status bab_instance_to_json(const bab_instance* inst, char** out);
BAB_API void bab_instance_free(bab_instance* inst);

BAB_API size_t bab_instance_items(const bab_instance* inst);
BAB_API size_t bab_instance_buyers(const bab_instance* inst);

/* JSON array of violated invariants; "[]" when valid. */
BAB_API bab_status bab_instance_validate(const bab_instance* inst, char** report_json);

/* {"m", "n", "tte", "budget_slack": [...]} where slack is b_j minus the
 * larger allocation spend of buyer j. */
BAB_API bab_status bab_instance_summary(const bab_instance* inst, char** out);

/* ---- designs --------------------------------------------------------- */

/* kind: "bernoulli" | "unconstrained" | "constrained" | "online".
 * options_json (may be NULL): {p, tolerance, max_iterations}.
 * A constrained solve that misses its tolerance returns BAB_ERR_SOLVER and
 * still sets *out so the certificate can be inspected. */
BAB_API bab_status bab_design_create(const bab_instance* inst, const char* kind, const char* options_json,
                                     bab_design** out);
BAB_API void bab_design_free(bab_design* design);

BAB_API size_t bab_design_rows(const bab_design* design);
BAB_API size_t bab_design_cols(const bab_design* design);
/* Entry x_ij; NaN when out of range. */
BAB_API double bab_design_get(const bab_design* design, size_t i, size_t j);

/* {"kind", "x", "certificate"}; certificate present for constrained. */
BAB_API bab_status bab_design_to_json(const bab_design* design, char** out);
BAB_API bab_status bab_design_save(const bab_design* design, const char* path);

/* ---- simulation ------------------------------------------------------ */

/* Monte-Carlo summary for one instance; config keys as for sweeps.
 * Writes {"design", "throttle", "estimator", "trials", "tte", "mean",
 * "bias", "bias_se", "stddev", "stddev_se", "mse", "rel_bias",
 * "rel_stddev", "variance_formula", "mse_bound"}. */
BAB_API bab_status bab_simulate(const bab_instance* inst, const char* config_json, char** out);

/* Runs a sweep and writes <name>.csv (plus SVG charts when write_svg) into
 * out_dir. *out (may be NULL) receives {"rows", "files"}. */
BAB_API bab_status bab_sweep(const char* config_json, const char* out_dir, int write_svg,
                             bab_progress_fn progress, void* user, char** out);

/* Streams the instance through the online design. config_json (may be
 * NULL): {tolerance, max_iterations, order: "identity" | "reverse" |
 * "random", permutation: [...]}. trace_csv (may be NULL) receives
 * step,sampled_buyer,feasible,spend rows as they happen, so a solver
 * failure leaves the completed prefix on disk. *out receives
 * {"estimate", "tte", "seed", "steps", "allocated", "rejected",
 * "solver_calls", "order"}. */
BAB_API bab_status bab_online_run(const bab_instance* inst, const char* config_json, uint64_t seed,
                                  const char* trace_csv, bab_step_fn on_step, void* user, char** out);

#ifdef __cplusplus
}
#endif

#endif

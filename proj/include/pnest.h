#ifndef PNEST_H
#define PNEST_H

/*
 * C interface for estimating treatment-specific means and average treatment
 * effects in the target population of a partially nested trial design.
 *
 * All functions that can fail return a pnest_status; on failure the
 * thread-local message from pnest_last_error() describes the cause. Handles
 * returned through out-parameters are owned by the caller and released with
 * the matching _free function.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pnest_status {
  PNEST_OK = 0,
  PNEST_E_VALIDATION = 2, /* bad input data or configuration */
  PNEST_E_ESTIMATION = 3, /* model fitting or resampling failed */
  PNEST_E_USAGE = 4       /* API misuse: null handle, bad index, missing seed */
} pnest_status;

/* Last error message for the calling thread; empty string after success. */
const char* pnest_last_error(void);

/* Index conventions shared by the getters below. */
enum {
  PNEST_EST_TRIAL = 0,
  PNEST_EST_G = 1,
  PNEST_EST_W = 2,
  PNEST_EST_AUG = 3
};
enum {
  PNEST_TARGET_PSI0 = 0,
  PNEST_TARGET_PSI1 = 1,
  PNEST_TARGET_ATE = 2
};
enum {
  PNEST_METHOD_POINT = 0,
  PNEST_METHOD_SANDWICH = 1,
  PNEST_METHOD_BOOT_NORMAL = 2,
  PNEST_METHOD_BOOT_PERCENTILE = 3
};
enum {
  PNEST_MEASURE_ESTIMATE = 0,
  PNEST_MEASURE_SE = 1,
  PNEST_MEASURE_LOWER = 2,
  PNEST_MEASURE_UPPER = 3
};
enum {
  PNEST_CELL_SCALED_BIAS = 0,
  PNEST_CELL_SCALED_SD = 1,
  PNEST_CELL_COVERAGE_SANDWICH = 2,
  PNEST_CELL_COVERAGE_BOOTSTRAP = 3
};

/* ---- dataset ---- */

typedef struct pnest_dataset pnest_dataset;

/*
 * Loads a CSV file with one header row: covariate columns plus p, s, a, y.
 * covariate_columns selects and orders the covariates; pass NULL with
 * n_columns = 0 to use every non-reserved column in file order.
 * continuous_outcome selects the outcome family (0 binary, 1 continuous).
 */
pnest_status pnest_dataset_from_csv(const char* path, const char* const* covariate_columns,
                                    size_t n_columns, int continuous_outcome,
                                    pnest_dataset** out);
void pnest_dataset_free(pnest_dataset* ds);

int pnest_dataset_n(const pnest_dataset* ds);        /* all rows */
int pnest_dataset_n_target(const pnest_dataset* ds); /* p = 0 rows */
int pnest_dataset_n_nested(const pnest_dataset* ds); /* p = 1 rows */

/* ---- analysis ---- */

typedef struct pnest_analyze_options {
  int use_trial, use_g, use_w, use_aug; /* estimator selection */
  int do_sandwich;
  int do_bootstrap;
  int bootstrap_b;
  int has_seed; /* required when do_bootstrap */
  uint64_t seed;
  int threads;
  int stratified_bootstrap; /* resample within each part */
  int has_known_treat_prob;
  double known_treat_prob; /* replaces the fitted treatment model */
  int normalized_weights;
  int do_diagnostics;
} pnest_analyze_options;

/* Fills the defaults: all estimators, sandwich only, B = 1000, 1 thread. */
void pnest_analyze_options_init(pnest_analyze_options* opts);

typedef struct pnest_analysis pnest_analysis;

pnest_status pnest_analyze(const pnest_dataset* ds, const pnest_analyze_options* opts,
                           pnest_analysis** out);
void pnest_analysis_free(pnest_analysis* an);

/*
 * Reads one number from the report. method/measure follow the enums above;
 * PNEST_METHOD_POINT only supports PNEST_MEASURE_ESTIMATE. Asking for an
 * estimator or method that was not computed is a usage error.
 */
pnest_status pnest_analysis_value(const pnest_analysis* an, int estimator, int target,
                                  int method, int measure, double* out);

pnest_status pnest_analysis_write_csv(const pnest_analysis* an, const char* path);
pnest_status pnest_analysis_write_text(const pnest_analysis* an, const char* path);
pnest_status pnest_analysis_write_diagnostics_csv(const pnest_analysis* an, const char* path);
pnest_status pnest_analysis_write_diagnostics_text(const pnest_analysis* an, const char* path);

/* ---- simulation ---- */

typedef struct pnest_simulate_options {
  const char* scenario; /* "no_em", "moderate_em", "strong_em" */
  int continuous_outcome;
  int runs;
  int bootstrap_b; /* 0 disables bootstrap coverage */
  int has_seed;    /* seed is always required for simulation */
  uint64_t seed;
  int threads;
  int compute_sandwich;
  int compute_diagnostics;
  int64_t truth_draws;
} pnest_simulate_options;

/* Fills the defaults: no_em, binary, 1000 runs, B = 0, 1 thread. */
void pnest_simulate_options_init(pnest_simulate_options* opts);

typedef struct pnest_simreport pnest_simreport;

pnest_status pnest_simulate(const pnest_simulate_options* opts, pnest_simreport** out);
void pnest_simreport_free(pnest_simreport* rep);

/* measure follows the PNEST_CELL_* enum; asking for a coverage that was not
 * computed is a usage error. */
pnest_status pnest_simreport_cell(const pnest_simreport* rep, int estimator, int target,
                                  int measure, double* out);
pnest_status pnest_simreport_truth(const pnest_simreport* rep, int target, double* out);
int pnest_simreport_failed_runs(const pnest_simreport* rep);

pnest_status pnest_simreport_write_csv(const pnest_simreport* rep, const char* path);
pnest_status pnest_simreport_write_text(const pnest_simreport* rep, const char* path);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PNEST_H */

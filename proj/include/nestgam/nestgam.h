#ifndef NESTGAM_H
#define NESTGAM_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define NG_API __declspec(dllexport)
#else
#define NG_API __attribute__((visibility("default")))
#endif

typedef enum ng_status {
  NG_OK = 0,
  NG_ERR_INVALID_ARGUMENT = 1,
  NG_ERR_CONFIG = 2,
  NG_ERR_DATA = 3,
  NG_ERR_IO = 4,
  NG_ERR_NUMERIC = 5,
  NG_ERR_NOT_CONVERGED = 6,
  NG_ERR_INTERNAL = 7
} ng_status;

/* Fitted model with its posterior summary. */
typedef struct ng_fit ng_fit;

typedef struct ng_fit_info {
  int n_coef;
  int n_penalties;
  int n_rows;
  int converged;
  int outer_iterations;
  double laml;
  double loglik;
  double edf;
  double aic;
} ng_fit_info;

typedef struct ng_scores {
  int n;
  int scored; /* 0 when the response column is absent */
  double log_score;      /* sum of -log p(y_i) */
  double mean_log_score; /* log_score / n */
  double crps;           /* mean */
  double rmse;
  double mae;
} ng_scores;

/* Message of the last failed call on this thread; empty when none. */
NG_API const char* ng_last_error(void);
NG_API int ng_format_version(void);
/* Releases strings returned through char** out-parameters. */
NG_API void ng_string_free(char* s);

/* Fits the model described by a JSON config to a CSV table. On NG_ERR_NOT_CONVERGED the
   handle is still returned so the caller can inspect or save it. */
NG_API ng_status ng_fit_run(const char* config_path, const char* data_path, uint64_t seed, ng_fit** out);
NG_API ng_status ng_fit_save(const ng_fit* fit, const char* path);
NG_API ng_status ng_fit_load(const char* path, ng_fit** out);
NG_API void ng_fit_free(ng_fit* fit);

NG_API ng_status ng_fit_get_info(const ng_fit* fit, ng_fit_info* info);
/* Smoothing parameters (log scale); `len` receives the count, copies at most `cap`. */
NG_API ng_status ng_fit_get_rho(const ng_fit* fit, double* rho, int cap, int* len);
NG_API ng_status ng_fit_get_coef(const ng_fit* fit, double* coef, int cap, int* len);
/* Human-readable report: per-term edf, AIC, smoothing parameters, inner estimates. */
NG_API ng_status ng_fit_summary(const ng_fit* fit, char** text);
/* Outer-iteration trace as CSV. */
NG_API ng_status ng_fit_trace_csv(const ng_fit* fit, char** text);
/* Writes one grid CSV per smooth and nested effect into `dir`; `grid_points` <= 0 uses the config default. */
NG_API ng_status ng_fit_write_effects(const ng_fit* fit, const char* dir, int grid_points);

/* Predicts for the rows of a CSV and writes per-row parameters (plus scores when the response is present). */
NG_API ng_status ng_predict_csv(const ng_fit* fit, const char* data_path, const char* out_path, ng_scores* scores);

/* Simulates a scenario given as JSON (file path) and writes the table; the ground truth goes to
   `truth_path` as JSON when it is non-null. */
NG_API ng_status ng_simulate_csv(const char* scenario_path, uint64_t seed, const char* out_path, const char* truth_path);

/* Runs the oracle check suite. `profile` is "default" or "tight"; `corrupt_rule` may be null.
   The per-check table is returned in `report` (CSV), `all_pass` is set to 0 or 1. */
NG_API ng_status ng_check_run(const char* profile, const char* corrupt_rule, uint64_t seed, char** report,
                              int* all_pass);

#ifdef __cplusplus
}
#endif

#endif

/* tmsgd: stochastic solvers for consistent least-squares systems with
 * tuple-missing data, exposed as a C shared-library API.
 *
 * All functions returning tmsgd_status set a thread-local error message
 * (tmsgd_last_error) on failure. Strings returned through char** out
 * parameters are heap-allocated and must be released with tmsgd_string_free.
 */
#ifndef TMSGD_H
#define TMSGD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tmsgd_status {
  TMSGD_OK = 0,
  /* invalid dimensions, parameters out of range, malformed configs */
  TMSGD_ERR_INVALID_ARGUMENT = 1,
  /* missing/unreadable/unwritable files, malformed file contents */
  TMSGD_ERR_IO = 2,
  TMSGD_ERR_INTERNAL = 3
} tmsgd_status;

const char* tmsgd_version(void);

/* Message describing the most recent failure on this thread ("" if none). */
const char* tmsgd_last_error(void);

void tmsgd_string_free(char* s);

/* Opaque handle for a consistent overdetermined system (A, y, x_star). */
typedef struct tmsgd_system tmsgd_system;

/* Opaque handle for a solver error trace. */
typedef struct tmsgd_trace tmsgd_trace;

/* Generate A (m x n, standard Gaussian), x_star (Gaussian), y = A x_star. */
tmsgd_status tmsgd_system_generate(size_t m, size_t n, uint64_t seed,
                                   tmsgd_system** out);

/* dir must contain A.txt, y.txt, xstar.txt in the plain-text matrix format
 * (first line "rows cols", then rows lines of cols reals). */
tmsgd_status tmsgd_system_load(const char* dir, tmsgd_system** out);
tmsgd_status tmsgd_system_save(const tmsgd_system* sys, const char* dir);
tmsgd_status tmsgd_system_dims(const tmsgd_system* sys, size_t* m, size_t* n);
void tmsgd_system_free(tmsgd_system* sys);

typedef struct tmsgd_solve_config {
  const char* method;   /* "sgd" | "msgd" | "tuple-msgd" */
  double p;             /* tuple presence probability, in (0, 1] */
  size_t ell;           /* tuple length, must divide n */
  const char* schedule; /* "fixed" | "inv-mu-k" */
  double alpha;         /* step for the fixed schedule */
  double mu;            /* inv-mu-k strong convexity constant; <= 0 computes
                           sigma_min(A)^2 / m from the system */
  int project;          /* < 0 auto (on for inv-mu-k), 0 off, > 0 on */
  double radius;        /* projection radius; <= 0 means 2 * ||x_star|| */
  size_t iterations;
  uint64_t seed;
} tmsgd_solve_config;

tmsgd_status tmsgd_solve(const tmsgd_system* sys, const tmsgd_solve_config* cfg,
                         tmsgd_trace** out);

/* Number of recorded errors (iterations + 1, entry 0 is the initial error). */
size_t tmsgd_trace_length(const tmsgd_trace* tr);
tmsgd_status tmsgd_trace_errors(const tmsgd_trace* tr, double* buf, size_t len);
double tmsgd_trace_final_error(const tmsgd_trace* tr);
tmsgd_status tmsgd_trace_write_csv(const tmsgd_trace* tr, const char* path,
                                   size_t thin);
/* Resolved solver configuration (including computed mu / radius) as JSON. */
tmsgd_status tmsgd_trace_config_json(const tmsgd_trace* tr, char** out);
void tmsgd_trace_free(tmsgd_trace* tr);

/* suite: "all" | "unbiased" | "bias" | "bound" | "convergence".
 * options_json (may be NULL) overrides the default check instance, e.g.
 * {"m":50,"n":8,"ells":[1,2,4],"ps":[0.3,0.6,0.9],"seed":1}.
 * all_pass receives 1 if every check in the suite passed. */
tmsgd_status tmsgd_check_run(const char* suite, const char* options_json,
                             char** report_json, int* all_pass);

/* preset_or_path: a preset name (fig1, fig2, fig3, fig1-mini, fig2-mini,
 * fig3-mini) or a path to an experiment spec JSON file.
 * overrides_json (may be NULL) accepts {"replications":R,"workers":W,
 * "seed":S,"thin":T}. */
tmsgd_status tmsgd_bench_run(const char* preset_or_path, const char* out_dir,
                             const char* overrides_json, char** summary_json);

/* options_json (may be NULL) accepts {"readings_per_window":5,
 * "window_span_seconds":300,"missing_fraction":0.4,"alpha":1e-3,
 * "iterations":K,"seed":S,"reject_cap":0.1,"thin":T}. */
tmsgd_status tmsgd_cgm_run(const char* input_csv, const char* schema_path,
                           const char* out_dir, const char* options_json,
                           char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* TMSGD_H */

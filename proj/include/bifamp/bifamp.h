/* bifamp - Bayes-optimal bilinear matrix factorization via approximate
 * message passing, with asymptotic state-evolution analysis and Bethe /
 * replica free-entropy evaluation.
 *
 * C interface to the shared library. All functions are thread-safe unless
 * noted. Handles are opaque; every object obtained from a *_create or
 * *_run function must be released with the matching *_free.
 *
 * Configuration documents are JSON strings; see docs/FORMATS.md in the
 * source tree for the schema. Results are returned as a handle exposing a
 * JSON summary plus zero or more named CSV tables.
 */
#ifndef BIFAMP_H
#define BIFAMP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bifamp_status {
  BIFAMP_OK = 0,
  BIFAMP_ERR_INVALID = 1,     /* bad handle / null pointer */
  BIFAMP_ERR_CONFIG = 2,      /* config JSON failed validation */
  BIFAMP_ERR_NUMERIC = 3,     /* divergence, quadrature failure, ... */
  BIFAMP_ERR_UNCONVERGED = 4, /* iteration cap hit (strict contexts only) */
  BIFAMP_ERR_IO = 5           /* file could not be read/written */
} bifamp_status;

typedef struct bifamp_instance bifamp_instance; /* teacher-student instance */
typedef struct bifamp_result bifamp_result;     /* run output */

/* Library version, e.g. "0.1.0". Static string, do not free. */
const char* bifamp_version(void);

/* Message for the last error on the calling thread. Static storage,
 * overwritten by the next failing call on the same thread. */
const char* bifamp_last_error(void);

/* Cap the worker pool used by sweeps and multi-seed runs.
 * n <= 0 restores the default (hardware concurrency). */
bifamp_status bifamp_set_threads(int n);

/* --- instances ----------------------------------------------------- */

/* Generate a teacher-student instance. config must contain "problem",
 * "n" and "seed". Regeneration with identical inputs is bit-identical. */
bifamp_status bifamp_generate(const char* config_json, bifamp_instance** out);

/* Binary instance file round-trip (layout in docs/FORMATS.md). Writes are
 * atomic: a temporary file is renamed into place. */
bifamp_status bifamp_instance_load(const char* path, bifamp_instance** out);
bifamp_status bifamp_instance_save(const bifamp_instance* inst, const char* path);

/* JSON description (problem, dims, seed). Caller frees with bifamp_string_free. */
bifamp_status bifamp_instance_info(const bifamp_instance* inst, char** out_json);

void bifamp_instance_free(bifamp_instance* inst);

/* --- runs ---------------------------------------------------------- */

/* GAMP / relaxed-BP on one instance. config carries the "amp" options
 * block (may be empty for defaults). */
bifamp_status bifamp_amp(const bifamp_instance* inst, const char* config_json,
                         bifamp_result** out);

/* Scalar state evolution: fixed point + trajectory table. */
bifamp_status bifamp_se(const char* config_json, bifamp_result** out);

/* Closed-form and numeric thresholds for one problem. */
bifamp_status bifamp_thresholds(const char* config_json, bifamp_result** out);

/* Parameter-grid sweep of MMSE / AMP-MSE; "grid" table in the result. */
bifamp_status bifamp_phase(const char* config_json, bifamp_result** out);

/* --- results ------------------------------------------------------- */

/* JSON summary. Pointer owned by the result handle. */
const char* bifamp_result_json(const bifamp_result* res);

/* Named CSV table ("trajectory", "trace", "grid"). NULL if absent. */
const char* bifamp_result_table(const bifamp_result* res, const char* name);

/* 1 when the underlying iteration converged, 0 otherwise. */
int bifamp_result_converged(const bifamp_result* res);

void bifamp_result_free(bifamp_result* res);

void bifamp_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BIFAMP_H */

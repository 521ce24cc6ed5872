/*
 * C interface to the mode-reduction pipeline.
 *
 * An experiment handle wraps one configuration (a flat key-value file); the
 * pipeline's stages run individually or all at once, each persisting its
 * artifacts under the configured output directory before the next begins,
 * so completed stages are skipped on rerun.
 *
 * Every fallible call returns mr_status; on failure,
 * mr_last_error_message() holds a description for the calling thread.
 */
#ifndef MODERED_H
#define MODERED_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mr_status {
  MR_OK = 0,
  MR_ERR_INVALID_ARGUMENT = 1,
  MR_ERR_DIMENSION_MISMATCH = 2,
  MR_ERR_GRID_MISMATCH = 3,
  MR_ERR_INSUFFICIENT_HISTORY = 4,
  MR_ERR_GENERATION_FAILED = 5,
  MR_ERR_NONPOSITIVE_AREA = 6,
  MR_ERR_INVALID_CORRELATION = 7,
  MR_ERR_NUMERICAL_BLOWUP = 8,
  MR_ERR_IO = 9,
  MR_ERR_STAGE_FAILED = 10,
  MR_ERR_UNKNOWN = 11
} mr_status;

/* Pipeline stages, in execution order. */
typedef enum mr_stage {
  MR_STAGE_COUPLINGS = 0,
  MR_STAGE_TRUTH = 1,
  MR_STAGE_FIT_OU = 2,
  MR_STAGE_AMRS = 3,
  MR_STAGE_KERNELS = 4,
  MR_STAGE_MZ = 5,
  MR_STAGE_DELTA_MZ = 6,
  MR_STAGE_COMPARE = 7
} mr_stage;

#define MR_STAGE_COUNT 8

typedef struct mr_experiment mr_experiment;

/* Library version, e.g. "0.1.0". */
const char* mr_version(void);

/* Description of the calling thread's last failure ("" when none). */
const char* mr_last_error_message(void);

/* Stage name <-> enum ("couplings"/"gen-couplings", "truth", "fit-ou",
 * "amrs", "kernels", "mz", "delta-mz", "compare"). */
const char* mr_stage_name(mr_stage stage);
mr_status mr_stage_from_name(const char* name, mr_stage* out_stage);

/* Creates an experiment from a configuration file or its text.  The handle
 * must be released with mr_experiment_close (safe on NULL). */
mr_status mr_experiment_open(const char* spec_path, mr_experiment** out);
mr_status mr_experiment_open_text(const char* spec_text, mr_experiment** out);
void mr_experiment_close(mr_experiment* experiment);

/* Configuration overrides, applied before the next stage run. */
mr_status mr_experiment_set_seed(mr_experiment* experiment, uint64_t seed);
mr_status mr_experiment_set_threads(mr_experiment* experiment, int threads);
mr_status mr_experiment_set_out_dir(mr_experiment* experiment,
                                    const char* out_dir);

/* Output directory the artifacts land in (owned by the handle). */
const char* mr_experiment_out_dir(const mr_experiment* experiment);

/* Runs one stage.  *out_skipped is set to 1 when the stage's artifacts
 * already existed (nothing ran), else 0; *out_seconds to the wall-clock
 * duration.  Either out pointer may be NULL. */
mr_status mr_run_stage(mr_experiment* experiment, mr_stage stage,
                       int* out_skipped, double* out_seconds);

/* Runs every stage in order, resuming past completed ones. */
mr_status mr_run_all(mr_experiment* experiment);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MODERED_H */

#ifndef MRS_VPR_H
#define MRS_VPR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MrsStatus {
  MRS_STATUS_OK = 0,
  MRS_STATUS_NULL_POINTER = 1,
  MRS_STATUS_INVALID_CONFIG = 2,
  MRS_STATUS_INVALID_INPUT = 3,
  MRS_STATUS_SCHEDULE_INFEASIBLE = 4,
  MRS_STATUS_SEARCH_FAILED = 5,
  MRS_STATUS_IO = 6,
  MRS_STATUS_PANIC = 7,
} MrsStatus;

/**
 * Opaque multi-resolution match result.
 */
typedef struct MrsMatch MrsMatch;

/**
 * Opaque frame-descriptor sequence.
 */
typedef struct MrsSequence MrsSequence;

/**
 * Search parameters. Obtain defaults from [`mrs_params_default`].
 */
typedef struct MrsParams {
  size_t l_max;
  double tau;
  /**
   * Local search radius; 0 selects half the testing length per level.
   */
  size_t id_shift;
  double resample_fraction;
  double coverage_threshold;
  size_t iteration_cap;
  size_t min_test_len;
  uint64_t seed;
  /**
   * Worker threads; 0 uses every core.
   */
  size_t workers;
} MrsParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mrs_last_error(void);

/**
 * Static, NUL-terminated name of a status code.
 */
const char *mrs_status_name(enum MrsStatus status);

struct MrsParams mrs_params_default(void);

/**
 * Copies `frames * dim` row-major values into a new sequence.
 *
 * # Safety
 * `values` must point to `frames * dim` readable doubles; `out` must be a
 * valid pointer to writable storage.
 */
enum MrsStatus mrs_sequence_new(const double *values,
                                size_t frames,
                                size_t dim,
                                struct MrsSequence **out);

/**
 * Loads a descriptor CSV (one frame per row).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MrsStatus mrs_sequence_from_csv(const char *path, struct MrsSequence **out);

/**
 * Number of frames, or 0 for NULL.
 *
 * # Safety
 * `seq` must be NULL or a live handle.
 */
size_t mrs_sequence_len(const struct MrsSequence *seq);

/**
 * Descriptor length, or 0 for NULL.
 *
 * # Safety
 * `seq` must be NULL or a live handle.
 */
size_t mrs_sequence_dim(const struct MrsSequence *seq);

/**
 * # Safety
 * `seq` must be NULL or a handle not yet freed.
 */
void mrs_sequence_free(struct MrsSequence *seq);

/**
 * Generates a synthetic reference and a warped, noisy testing copy of one
 * of its windows. `end_index` receives the 1-based ground-truth end.
 *
 * # Safety
 * All output pointers must be writable.
 */
enum MrsStatus mrs_synthetic_generate(size_t ref_len,
                                      size_t test_len,
                                      size_t dim,
                                      double noise,
                                      double warp,
                                      uint64_t seed,
                                      struct MrsSequence **reference,
                                      struct MrsSequence **test,
                                      size_t *end_index);

/**
 * Multi-resolution search of `test` inside `reference`. `params` may be
 * NULL for defaults.
 *
 * # Safety
 * Handles must be live; `params` NULL or readable; `out` writable.
 */
enum MrsStatus mrs_match(const struct MrsSequence *reference,
                         const struct MrsSequence *test,
                         const struct MrsParams *params,
                         struct MrsMatch **out);

/**
 * Exhaustive search; any output pointer may be NULL.
 *
 * # Safety
 * Handles must be live; non-NULL outputs writable.
 */
enum MrsStatus mrs_baseline(const struct MrsSequence *reference,
                            const struct MrsSequence *test,
                            size_t *end_index,
                            double *velocity,
                            double *score);

/**
 * 1-based end index of the best match, or 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t mrs_match_index(const struct MrsMatch *m);

/**
 * # Safety
 * `m` must be NULL or a live handle.
 */
double mrs_match_score(const struct MrsMatch *m);

/**
 * # Safety
 * `m` must be NULL or a live handle.
 */
double mrs_match_velocity(const struct MrsMatch *m);

/**
 * Trajectory scores computed by the run.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
uint64_t mrs_match_evaluations(const struct MrsMatch *m);

/**
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t mrs_match_particle_count(const struct MrsMatch *m);

/**
 * Final particle at 0-based `rank` (best first).
 *
 * # Safety
 * `m` must be a live handle; `index` and `weight` writable.
 */
enum MrsStatus mrs_match_particle(const struct MrsMatch *m,
                                  size_t rank,
                                  size_t *index,
                                  double *weight);

/**
 * # Safety
 * `m` must be NULL or a handle not yet freed.
 */
void mrs_match_free(struct MrsMatch *m);

double mrs_predicted_speedup(size_t test_len, double tau, size_t l_max);

/**
 * # Safety
 * `out` must be writable.
 */
enum MrsStatus mrs_initial_particle_count(size_t ref_len, size_t test_len, double tau, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MRS_VPR_H */

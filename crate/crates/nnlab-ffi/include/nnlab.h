#ifndef NNLAB_H
#define NNLAB_H

/* Generated by cbindgen from nnlab-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes shared by every fallible entry point.
typedef enum NnlabStatus {
  NNLAB_STATUS_OK = 0,
  NNLAB_STATUS_NULL_POINTER = 1,
  NNLAB_STATUS_INVALID_ARGUMENT = 2,
  NNLAB_STATUS_INVALID_UTF8 = 3,
  // predict/reveal called out of order.
  NNLAB_STATUS_PROTOCOL_ERROR = 4,
  NNLAB_STATUS_RUNTIME_ERROR = 5,
  NNLAB_STATUS_INDEX_OUT_OF_RANGE = 6,
} NnlabStatus;

// Opaque online learner handle.
typedef struct NnlabLearner NnlabLearner;

// Opaque trajectory handle.
typedef struct NnlabTrajectory NnlabTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL. Borrowed;
// valid until the next failing call on the same thread.
const char *nnlab_last_error_message(void);

// Crate version as a static string; do not free.
const char *nnlab_version(void);

// Releases a string previously returned by an owning accessor.
//
// # Safety
// `s` must be NULL or a pointer obtained from this library's owning string
// accessors, not yet freed.
void nnlab_string_free(char *s);

// Creates a learner from a rule spec (`memo`, `1nn`, `<k>c1nn`,
// `knn:floor_log2`, `knn:floor_sqrt`, `knn:<k>`).
//
// # Safety
// `rule` must be a valid NUL-terminated string and `out` a valid pointer.
enum NnlabStatus nnlab_learner_new(const char *rule,
                                   uint32_t default_label,
                                   struct NnlabLearner **out);

// # Safety
// `learner` must be NULL or a live handle from [`nnlab_learner_new`].
void nnlab_learner_free(struct NnlabLearner *learner);

// Predicts the label for the exact point `x` (`m/2^e`). Must be followed by
// [`nnlab_learner_reveal`] before the next predict.
//
// # Safety
// `learner` must be a live handle; `x` a valid string; `out_label` a valid
// pointer.
enum NnlabStatus nnlab_learner_predict(struct NnlabLearner *learner,
                                       const char *x,
                                       uint32_t *out_label);

// Reveals the true label for the step whose prediction was just taken.
//
// # Safety
// `learner` must be a live handle.
enum NnlabStatus nnlab_learner_reveal(struct NnlabLearner *learner, uint32_t y);

// Current dataset size (eligible neighbor count).
//
// # Safety
// `learner` must be a live handle and `out` a valid pointer.
enum NnlabStatus nnlab_learner_dataset_size(const struct NnlabLearner *learner, uint64_t *out);

// Generates the input trajectory of a named preset (`thm4-1nn-fails`,
// `thm4-2c1nn-succeeds`, `thm3-knn-fails`, `crf-check`, `smv-grid`).
//
// # Safety
// `preset` must be a valid string and `out` a valid pointer.
enum NnlabStatus nnlab_trajectory_preset(const char *preset,
                                         uint64_t seed,
                                         uint64_t horizon,
                                         struct NnlabTrajectory **out);

// # Safety
// `traj` must be NULL or a live handle from [`nnlab_trajectory_preset`].
void nnlab_trajectory_free(struct NnlabTrajectory *traj);

// Number of samples in the trajectory.
//
// # Safety
// `traj` must be a live handle.
uint64_t nnlab_trajectory_len(const struct NnlabTrajectory *traj);

// The exact point at `index` (0-based) as a newly allocated `m/2^e` string;
// NULL when out of range. Free with [`nnlab_string_free`].
//
// # Safety
// `traj` must be a live handle.
char *nnlab_trajectory_point(const struct NnlabTrajectory *traj, uint64_t index);

// The true label at `index` (0-based).
//
// # Safety
// `traj` must be a live handle and `out_label` a valid pointer.
enum NnlabStatus nnlab_trajectory_label(const struct NnlabTrajectory *traj,
                                        uint64_t index,
                                        uint32_t *out_label);

// Runs a preset end to end and writes report.csv / report.json / plot.svg
// into `out_dir`. Pass 0 for `trials` or `workers` to keep preset defaults.
//
// # Safety
// `preset` and `out_dir` must be valid strings.
enum NnlabStatus nnlab_run_preset(const char *preset,
                                  uint64_t seed,
                                  uint64_t horizon,
                                  uint64_t trials,
                                  uint64_t workers,
                                  const char *out_dir);

// Runs the built-in self-test suites; returns 0 when all pass, 3 otherwise.
int32_t nnlab_selftest(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NNLAB_H */

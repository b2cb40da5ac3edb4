/* Generated by cbindgen from proxops-ffi; do not edit. */

#ifndef PROXOPS_H
#define PROXOPS_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PxStatus {
  PX_STATUS_OK = 0,
  PX_STATUS_NULL_POINTER = 1,
  PX_STATUS_INVALID_ARGUMENT = 2,
  // The episode has terminated; call `px_env_reset`.
  PX_STATUS_EPISODE_DONE = 3,
  PX_STATUS_IO = 4,
  // A file did not have the expected layout (e.g. bad checkpoint magic).
  PX_STATUS_FORMAT = 5,
  PX_STATUS_PANIC = 6,
  PX_STATUS_BUFFER_TOO_SMALL = 7,
} PxStatus;

typedef enum PxTask {
  PX_TASK_INSPECTION = 0,
  PX_TASK_DOCKING = 1,
} PxTask;

typedef enum PxSpaceKind {
  PX_SPACE_KIND_CONTINUOUS = 0,
  // `choices` evenly spaced values over `[-u_max, u_max]`.
  PX_SPACE_KIND_UNIFORM = 1,
  // An explicit symmetric value table (`values`, `num_values`).
  PX_SPACE_KIND_EXPLICIT = 2,
} PxSpaceKind;

// A running task environment.
typedef struct PxEnv PxEnv;

// A trained policy loaded from a checkpoint.
typedef struct PxPolicy PxPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message, NUL-terminated and
// truncated to `capacity`, into `buffer`. Returns the length the full
// message needs including its terminator (1 when there is no error).
//
// # Safety
// `buffer` must be null or valid for `capacity` bytes.
size_t px_last_error(char *buffer, size_t capacity);

// Creates an environment. `evaluation` scores inspection with the constant
// evaluation fuel weight. `values`/`num_values` are read only for explicit
// spaces and `choices` only for uniform ones.
//
// # Safety
// `values` must be valid for `num_values` reads; `out` must be writable.
enum PxStatus px_env_new(enum PxTask task,
                         enum PxSpaceKind kind,
                         double u_max,
                         size_t choices,
                         const double *values,
                         size_t num_values,
                         bool evaluation,
                         struct PxEnv **out_env);

// # Safety
// `env` must come from `px_env_new` and not be used afterwards.
void px_env_free(struct PxEnv *env);

// Observation length of the environment's task, 0 for a null handle.
//
// # Safety
// `env` must be null or a live handle.
size_t px_env_obs_dim(const struct PxEnv *env);

// Starts an episode and writes the first observation.
//
// # Safety
// `env` must be live; `obs` must be valid for `obs_len` writes.
enum PxStatus px_env_reset(struct PxEnv *env, uint64_t seed, double *obs, size_t obs_len);

// Applies a thrust `[fx, fy, fz]` in newtons as given (no projection onto
// the action space) and writes the next observation, the reward and the
// termination flag.
//
// # Safety
// `env` must be live; `thrust` valid for 3 reads; `obs` valid for
// `obs_len` writes; `reward` and `done` writable.
enum PxStatus px_env_step(struct PxEnv *env,
                          const double *thrust,
                          double *obs,
                          size_t obs_len,
                          double *reward,
                          bool *done);

// Writes `[x, y, z, vx, vy, vz]` of the current episode.
//
// # Safety
// `env` must be live; `state` valid for 6 writes.
enum PxStatus px_env_state(const struct PxEnv *env, double *state);

// Loads a policy checkpoint.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out_policy` writable.
enum PxStatus px_policy_load(const char *path, struct PxPolicy **out_policy);

// # Safety
// `policy` must come from `px_policy_load` and not be used afterwards.
void px_policy_free(struct PxPolicy *policy);

// Chooses an action for `obs` and writes it as thrust in newtons, decoded
// through `env`'s action space. `seed` drives stochastic sampling and is
// ignored when `deterministic` is set.
//
// # Safety
// Handles must be live; `obs` valid for `obs_len` reads; `thrust` for 3
// writes.
enum PxStatus px_policy_act(const struct PxPolicy *policy,
                            const struct PxEnv *env,
                            const double *obs,
                            size_t obs_len,
                            bool deterministic,
                            uint64_t seed,
                            double *thrust);

// Propagates `[x, y, z, vx, vy, vz]` by `dt` seconds under constant
// `thrust` with the default mean motion and deputy mass.
//
// # Safety
// `state_in` valid for 6 reads, `thrust` for 3, `state_out` for 6 writes.
enum PxStatus px_propagate(const double *state_in,
                           const double *thrust,
                           double dt,
                           double *state_out);

// Docking speed limit (m/s) at distance `r` (m) under the default limits.
double px_docking_max_speed(double r);

// Interquartile mean of `n` values.
//
// # Safety
// `values` valid for `n` reads; `result` writable.
enum PxStatus px_iqm(const double *values, size_t n, double *result);

// Percentile-bootstrap confidence interval of the IQM.
//
// # Safety
// `values` valid for `n` reads; `low` and `high` writable.
enum PxStatus px_bootstrap_ci(const double *values,
                              size_t n,
                              double level,
                              size_t resamples,
                              uint64_t seed,
                              double *low,
                              double *high);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROXOPS_H */

#ifndef PFL_SIM_H
#define PFL_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum PflStatus {
  PFL_STATUS_OK = 0,
  PFL_STATUS_NULL_POINTER = 1,
  PFL_STATUS_INVALID_ARGUMENT = 2,
  PFL_STATUS_POPULATION_ERROR = 3,
  PFL_STATUS_PRIVACY_ERROR = 4,
  PFL_STATUS_MODEL_ERROR = 5,
  PFL_STATUS_IO_ERROR = 6,
  PFL_STATUS_PANIC = 7,
} PflStatus;

// Opaque language-model handle.
typedef struct PflModel PflModel;

// Expected round latency and its closed-form bounds.
typedef struct PflLatency {
  double lower;
  double exact;
  double upper;
} PflLatency;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *pfl_last_error_message(void);

// Round latency for `N` devices, eligible fraction `p`, sampling rate `q`,
// cohort `C` and arrival rate `lambda`.
//
// # Safety
// `out` must be null or point to writable memory for one `PflLatency`.
enum PflStatus pfl_latency(uint64_t population,
                           double eligible_frac,
                           double sample_rate,
                           uint64_t cohort,
                           double rate_lambda,
                           struct PflLatency *out);

// Monte Carlo mean and standard error of the round latency.
//
// # Safety
// `mean` and `std_error` must be null or writable.
enum PflStatus pfl_latency_monte_carlo(uint64_t population,
                                       double eligible_frac,
                                       double sample_rate,
                                       uint64_t cohort,
                                       double rate_lambda,
                                       uint64_t trials,
                                       uint64_t seed,
                                       double *mean,
                                       double *std_error);

// Smallest noise multiplier meeting `(epsilon, delta)` after `rounds`
// rounds at sampling rate `q`, using the default order grid.
//
// # Safety
// `sigma` must be null or writable.
enum PflStatus pfl_calibrate_sigma(double q,
                                   uint64_t rounds,
                                   double epsilon,
                                   double delta,
                                   double tol,
                                   double *sigma);

// ε after `rounds` rounds of the subsampled Gaussian mechanism.
//
// # Safety
// `epsilon` must be null or writable.
enum PflStatus pfl_epsilon(double q, double sigma, uint64_t rounds, double delta, double *epsilon);

// Relative importance weight from target and source log-likelihoods.
//
// # Safety
// `weight` must be null or writable.
enum PflStatus pfl_relative_weight(double log_p_target,
                                   double log_p_source,
                                   double alpha,
                                   double *weight);

// Freshly initialized model.
//
// # Safety
// `out` must be null or writable; on success it receives a handle that
// must be released with `pfl_model_free`.
enum PflStatus pfl_model_new(uint32_t vocab_size,
                             uint32_t embed_dim,
                             uint32_t hidden_dim,
                             uint32_t seq_len,
                             uint64_t seed,
                             struct PflModel **out);

// Loads a checkpoint file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` as for `pfl_model_new`.
enum PflStatus pfl_model_load(const char *path, struct PflModel **out);

// Writes a checkpoint file.
//
// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum PflStatus pfl_model_save(const struct PflModel *model, const char *path);

// Number of parameters.
//
// # Safety
// `model` must be a live handle; `out` null or writable.
enum PflStatus pfl_model_num_params(const struct PflModel *model, size_t *out);

// Perplexity over `n_sequences` sequences stored row-major in `tokens`
// (`n_sequences × seq_len` ids).
//
// # Safety
// `model` must be a live handle, `tokens` must hold
// `n_sequences × seq_len` ids, and `out` must be null or writable.
enum PflStatus pfl_model_perplexity(const struct PflModel *model,
                                    const uint32_t *tokens,
                                    size_t n_sequences,
                                    double *out);

// Weighted mean next-token loss in nats; `weights` has one entry per sequence.
//
// # Safety
// As `pfl_model_perplexity`, and `weights` must hold `n_sequences` values.
enum PflStatus pfl_model_loss(const struct PflModel *model,
                              const uint32_t *tokens,
                              size_t n_sequences,
                              const double *weights,
                              double *out);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must be null or a handle not yet freed.
void pfl_model_free(struct PflModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PFL_SIM_H */

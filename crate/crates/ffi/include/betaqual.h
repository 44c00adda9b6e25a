#ifndef BETAQUAL_H
#define BETAQUAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call. Zero is success.
 */
typedef enum BqStatus {
  BQ_STATUS_OK = 0,
  BQ_STATUS_INVALID_INPUT = 1,
  BQ_STATUS_SUPPORT_VIOLATION = 2,
  BQ_STATUS_BOUNDARY = 3,
  BQ_STATUS_INITIALIZATION = 4,
  BQ_STATUS_PARSE = 5,
  BQ_STATUS_SCHEMA = 6,
  BQ_STATUS_EMPTY_DATASET = 7,
  BQ_STATUS_INFEASIBLE_TRUTH = 8,
  BQ_STATUS_UNDEFINED_AT_MEAN = 9,
  BQ_STATUS_IO = 10,
  BQ_STATUS_NULL_POINTER = 11,
  BQ_STATUS_INVALID_UTF8 = 12,
  BQ_STATUS_BUFFER_TOO_SMALL = 13,
  BQ_STATUS_PANIC = 14,
} BqStatus;

/**
 * Which rows a chain is fitted to.
 */
typedef enum BqModel {
  BQ_MODEL_JOINT = 0,
  BQ_MODEL_PERIOD1 = 1,
  BQ_MODEL_PERIOD2 = 2,
} BqModel;

/**
 * Opaque chain of posterior draws.
 */
typedef struct BqChain BqChain;

/**
 * Opaque survey dataset.
 */
typedef struct BqDataset BqDataset;

typedef struct BqSamplerConfig {
  uint64_t iterations;
  uint64_t burnin;
  uint64_t thin;
  uint64_t seed;
  double target_acceptance;
  double target_acceptance_weights;
  bool adapt_during_burnin;
} BqSamplerConfig;

typedef struct BqDic {
  double dbar;
  double d_at_mean;
  double p_d;
  double dic;
  /**
   * True when the deviance was evaluated at the nearest stored draw
   * because the posterior mean left the support.
   */
  bool nearest_draw;
} BqDic;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *bq_version(void);

/**
 * Message of the last failure on this thread, or NULL if none occurred.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *bq_last_error_message(void);

/**
 * Converts a beta mean and variance to shape parameters.
 *
 * # Safety
 * `a` and `b` must be valid for writes.
 */
enum BqStatus bq_moments_to_shape(double mu, double sigma2, double *a, double *b);

/**
 * Converts beta shape parameters to the mean and variance.
 *
 * # Safety
 * `mu` and `sigma2` must be valid for writes.
 */
enum BqStatus bq_shape_to_moments(double a, double b, double *mu, double *sigma2);

/**
 * Builds a dataset from a row-major `n x k` attribute matrix, `n` responses
 * and `n` period labels.
 *
 * # Safety
 * `x` must hold `n * k` values, `y` and `period` `n` values each, and `out`
 * must be valid for writes.
 */
enum BqStatus bq_dataset_new(size_t k,
                             size_t n,
                             const double *x,
                             const double *y,
                             const uint8_t *period,
                             struct BqDataset **out);

/**
 * Reads a survey CSV. `scale_mapping` (`endpoint` or `midpoint`) and
 * `boundary_policy` (`drop` or `clamp(eps)`) may be NULL for the defaults.
 *
 * # Safety
 * String arguments must be NUL-terminated or NULL where allowed; `out` must
 * be valid for writes.
 */
enum BqStatus bq_dataset_load_csv(const char *path,
                                  const char *scale_mapping,
                                  const char *boundary_policy,
                                  struct BqDataset **out);

/**
 * Number of rows, or 0 for NULL.
 *
 * # Safety
 * `data` must be NULL or a live dataset handle.
 */
size_t bq_dataset_n(const struct BqDataset *data);

/**
 * Number of attributes, or 0 for NULL.
 *
 * # Safety
 * `data` must be NULL or a live dataset handle.
 */
size_t bq_dataset_k(const struct BqDataset *data);

/**
 * Releases a dataset. NULL is ignored.
 *
 * # Safety
 * `data` must be NULL or a handle not yet freed.
 */
void bq_dataset_free(struct BqDataset *data);

struct BqSamplerConfig bq_sampler_config_default(void);

/**
 * Runs one chain. A NULL `config` uses the defaults.
 *
 * # Safety
 * `data` must be a live dataset handle, `config` NULL or valid, `out` valid
 * for writes.
 */
enum BqStatus bq_chain_run(const struct BqDataset *data,
                           enum BqModel model,
                           const struct BqSamplerConfig *config,
                           struct BqChain **out);

/**
 * Number of stored draws, or 0 for NULL.
 *
 * # Safety
 * `chain` must be NULL or a live chain handle.
 */
size_t bq_chain_len(const struct BqChain *chain);

/**
 * Number of weights `k + 1`, or 0 for NULL.
 *
 * # Safety
 * `chain` must be NULL or a live chain handle.
 */
size_t bq_chain_weight_count(const struct BqChain *chain);

/**
 * Copies the draws of weight `index` (0-based, the last is the latent
 * weight) into `out`, which must hold at least `bq_chain_len` values.
 *
 * # Safety
 * `chain` must be a live chain handle and `out` valid for `len` writes.
 */
enum BqStatus bq_chain_weight_trace(const struct BqChain *chain,
                                    size_t index,
                                    double *out,
                                    size_t len);

/**
 * Copies the variance draws into `out`.
 *
 * # Safety
 * `chain` must be a live chain handle and `out` valid for `len` writes.
 */
enum BqStatus bq_chain_sigma2_trace(const struct BqChain *chain, double *out, size_t len);

/**
 * DIC of a chain on the dataset it was fitted from.
 *
 * # Safety
 * `chain` and `data` must be live handles and `out` valid for writes.
 */
enum BqStatus bq_chain_dic(const struct BqChain *chain,
                           const struct BqDataset *data,
                           struct BqDic *out);

/**
 * Releases a chain. NULL is ignored.
 *
 * # Safety
 * `chain` must be NULL or a handle not yet freed.
 */
void bq_chain_free(struct BqChain *chain);

/**
 * Tail area of a difference distribution beyond zero.
 *
 * # Safety
 * `draws` must hold `n` values and `out` be valid for writes.
 */
enum BqStatus bq_tail_area_pi0(const double *draws, size_t n, double *out);

/**
 * Runs a full fit from a configuration file of `key = value` lines and
 * writes the result files to its `output_dir`.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string.
 */
enum BqStatus bq_fit_config_file(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BETAQUAL_H */

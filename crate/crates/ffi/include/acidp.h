#ifndef ACIDP_H
#define ACIDP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/**
 * Result of every fallible call.
 */
typedef enum AcidpStatus {
  ACIDP_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  ACIDP_STATUS_NULL_POINTER = 1,
  /**
   * An argument was out of range or not valid UTF-8.
   */
  ACIDP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Unknown key, bad parameter or inconsistent configuration.
   */
  ACIDP_STATUS_CONFIG = 3,
  /**
   * Malformed input file.
   */
  ACIDP_STATUS_PARSE = 4,
  /**
   * File system failure.
   */
  ACIDP_STATUS_IO = 5,
  /**
   * Failure while simulating.
   */
  ACIDP_STATUS_RUNTIME = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  ACIDP_STATUS_PANIC = 7,
} AcidpStatus;

typedef enum AcidpAlert {
  ACIDP_ALERT_NONE = 0,
  ACIDP_ALERT_YELLOW = 1,
  ACIDP_ALERT_RED = 2,
} AcidpAlert;

/**
 * A simulated market together with its price grid.
 */
typedef struct AcidpMarket AcidpMarket;

/**
 * A policy with its own random stream, driven round by round.
 */
typedef struct AcidpPolicy AcidpPolicy;

/**
 * Per-round record of a finished trial.
 */
typedef struct AcidpTrace AcidpTrace;

/**
 * One round of a trace.
 */
typedef struct AcidpTraceRow {
  size_t t;
  size_t arm;
  double price;
  uint32_t demand;
  double profit;
  double oracle_profit;
  double cum_regret;
  enum AcidpAlert alert;
} AcidpTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *acidp_version(void);

/**
 * Message of the most recent failure on this thread, or NULL if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *acidp_last_error_message(void);

/**
 * Builds canned segment market `case_id` (1 to 6) on the 20-price case
 * grid. `seed` draws the customer population the same way a harness trial
 * with that seed does.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum AcidpStatus acidp_market_case(uint32_t case_id, uint64_t seed, struct AcidpMarket **out);

/**
 * Builds a demand-table market. `path` names a CSV table whose first
 * product is sold in every round, or is NULL for the built-in table with
 * its three-product schedule.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` must be writable.
 */
enum AcidpStatus acidp_market_table(const char *path, struct AcidpMarket **out);

/**
 * Releases a market. NULL is ignored.
 *
 * # Safety
 * `market` must be NULL or a handle from `acidp_market_*` not yet freed.
 */
void acidp_market_free(struct AcidpMarket *market);

/**
 * Number of prices on the market's grid, or 0 for NULL.
 *
 * # Safety
 * `market` must be NULL or a live handle.
 */
size_t acidp_market_arms(const struct AcidpMarket *market);

/**
 * Customers per round, or 0 for NULL.
 *
 * # Safety
 * `market` must be NULL or a live handle.
 */
uint32_t acidp_market_batch_size(const struct AcidpMarket *market);

/**
 * Price of `arm`.
 *
 * # Safety
 * `market` must be a live handle and `out` writable.
 */
enum AcidpStatus acidp_market_price(const struct AcidpMarket *market, size_t arm, double *out);

/**
 * Purchase probability of one customer at `price` in round `t`.
 *
 * # Safety
 * `market` must be a live handle and `out` writable.
 */
enum AcidpStatus acidp_market_true_demand(const struct AcidpMarket *market,
                                          size_t t,
                                          double price,
                                          double *out);

/**
 * Best arm in round `t` and its expected profit. Either output may be
 * NULL.
 *
 * # Safety
 * `market` must be a live handle; outputs must be NULL or writable.
 */
enum AcidpStatus acidp_market_oracle(const struct AcidpMarket *market,
                                     size_t t,
                                     size_t *out_arm,
                                     double *out_profit);

/**
 * Creates policy `key` for the market's grid. `params` is an optional
 * TOML table of hyperparameters, for example `"epsilon = 0.1"`.
 *
 * # Safety
 * `market` must be a live handle, `key` a NUL-terminated string, `params`
 * NULL or NUL-terminated, and `out` writable.
 */
enum AcidpStatus acidp_policy_new(const struct AcidpMarket *market,
                                  const char *key,
                                  const char *params,
                                  uint64_t seed,
                                  struct AcidpPolicy **out);

/**
 * Releases a policy. NULL is ignored.
 *
 * # Safety
 * `policy` must be NULL or a handle from `acidp_policy_new` not yet freed.
 */
void acidp_policy_free(struct AcidpPolicy *policy);

/**
 * Arm to offer in round `t`.
 *
 * # Safety
 * `policy` must be a live handle and `out_arm` writable.
 */
enum AcidpStatus acidp_policy_choose(struct AcidpPolicy *policy, size_t t, size_t *out_arm);

/**
 * Reports that `demand` of the batch bought at `arm` in round `t`. The
 * alert raised by this observation is written to `out_alert` unless it is
 * NULL.
 *
 * # Safety
 * `policy` must be a live handle; `out_alert` must be NULL or writable.
 */
enum AcidpStatus acidp_policy_observe(struct AcidpPolicy *policy,
                                      size_t t,
                                      size_t arm,
                                      uint32_t demand,
                                      enum AcidpAlert *out_alert);

/**
 * Plays policy `key` against the market for `horizon` rounds. Random
 * streams follow the harness convention, so a market built with the same
 * seed reproduces harness trial traces exactly.
 *
 * # Safety
 * `market` must be a live handle, `key` NUL-terminated, `params` NULL or
 * NUL-terminated, and `out` writable.
 */
enum AcidpStatus acidp_run_trial(const struct AcidpMarket *market,
                                 const char *key,
                                 const char *params,
                                 size_t horizon,
                                 uint64_t seed,
                                 struct AcidpTrace **out);

/**
 * Releases a trace. NULL is ignored.
 *
 * # Safety
 * `trace` must be NULL or a handle from `acidp_run_trial` not yet freed.
 */
void acidp_trace_free(struct AcidpTrace *trace);

/**
 * Number of rounds, or 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
size_t acidp_trace_len(const struct AcidpTrace *trace);

/**
 * Cumulative regret after the last round, or 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
double acidp_trace_final_regret(const struct AcidpTrace *trace);

/**
 * Copies row `index` (0-based) into `out`.
 *
 * # Safety
 * `trace` must be a live handle and `out` writable.
 */
enum AcidpStatus acidp_trace_row(const struct AcidpTrace *trace,
                                 size_t index,
                                 struct AcidpTraceRow *out);

/**
 * Writes the trace as CSV to `path`.
 *
 * # Safety
 * `trace` must be a live handle and `path` NUL-terminated.
 */
enum AcidpStatus acidp_trace_write_csv(const struct AcidpTrace *trace, const char *path);

/**
 * Exact two-sided binomial p-value of `d` buyers out of `n` under purchase
 * probability `p0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum AcidpStatus acidp_binomial_pvalue(uint32_t d, uint32_t n, double p0, double *out);

/**
 * Half-width of the time-uniform confidence band at time `tau` and level
 * `alpha1`. Fails with `InvalidArgument` for `tau < 2`.
 *
 * # Safety
 * `out` must be writable.
 */
enum AcidpStatus acidp_confidence_radius(double tau, double alpha1, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACIDP_H */

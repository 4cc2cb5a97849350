#ifndef SWITCHCOS_H
#define SWITCHCOS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Option type codes accepted by the pricing calls.
 */
#define SC_CALL 0

#define SC_PUT 1

/*
 Result codes of every fallible call.
 */
typedef enum ScStatus {
  SC_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  SC_STATUS_NULL_POINTER = 1,
  /*
   A string argument was not valid UTF-8.
   */
  SC_STATUS_INVALID_UTF8 = 2,
  /*
   An argument or model parameter was out of range.
   */
  SC_STATUS_INVALID_ARGUMENT = 3,
  /*
   Malformed JSON or CSV input.
   */
  SC_STATUS_PARSE = 4,
  /*
   A numerical routine failed, for example a negative COS price.
   */
  SC_STATUS_NUMERICAL = 5,
  /*
   A file could not be read or written.
   */
  SC_STATUS_IO = 6,
  /*
   An internal panic was caught.
   */
  SC_STATUS_PANIC = 7,
} ScStatus;

/*
 Opaque model handle.
 */
typedef struct ScModel ScModel;

/*
 Monte Carlo estimate with its 95% confidence interval.
 */
typedef struct ScMcResult {
  double price;
  double std_error;
  double ci_low;
  double ci_high;
} ScMcResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failed call on this thread, or an empty
 string. Valid until the next call on the same thread.
 */
const char *sc_last_error(void);

/*
 Parses a model document (see the library's model file format).

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ScStatus sc_model_from_json(const char *json, struct ScModel **out);

/*
 Reads a model file.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ScStatus sc_model_load(const char *path, struct ScModel **out);

/*
 Copy of `model` with both drifts set to their risk-neutral values.

 # Safety
 `model` must come from this library and `out` must be a valid pointer.
 */
enum ScStatus sc_model_risk_neutral(const struct ScModel *model, struct ScModel **out);

/*
 Serializes `model` as JSON. Release the string with `sc_string_free`.

 # Safety
 `model` must come from this library and `out` must be a valid pointer.
 */
enum ScStatus sc_model_to_json(const struct ScModel *model, char **out);

/*
 Releases a model handle. Null is ignored.

 # Safety
 `model` must be null or a handle from this library not yet freed.
 */
void sc_model_free(struct ScModel *model);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must be null or a string from this library not yet freed.
 */
void sc_string_free(char *s);

/*
 COS price of a European option. `n_terms` of 0 selects the default.

 # Safety
 `model` must come from this library and `out_price` must be valid.
 */
enum ScStatus sc_price_cos(const struct ScModel *model,
                           double maturity,
                           double strike,
                           int32_t kind,
                           uint32_t n_terms,
                           double *out_price);

/*
 Monte Carlo price. A `dt` of zero or less steps once per regime segment.

 # Safety
 `model` must come from this library and `out` must be valid.
 */
enum ScStatus sc_price_mc(const struct ScModel *model,
                          double maturity,
                          double strike,
                          int32_t kind,
                          uint64_t n_paths,
                          double dt,
                          uint64_t seed,
                          struct ScMcResult *out);

/*
 Characteristic function of the log-return over `t` at real `u`.

 # Safety
 `model` must come from this library; `out_re` and `out_im` must be valid.
 */
enum ScStatus sc_switching_cf(const struct ScModel *model,
                              double t,
                              double u,
                              double *out_re,
                              double *out_im);

/*
 Black-Scholes price, for checking the reduced model.

 # Safety
 `out_price` must be valid.
 */
enum ScStatus sc_bs_price(double s0,
                          double strike,
                          double r,
                          double sigma,
                          double t,
                          int32_t kind,
                          double *out_price);

/*
 Library version as a static string.
 */
const char *sc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWITCHCOS_H */

#ifndef MAXCONV_H
#define MAXCONV_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Codes 2 to 4 match the exit codes of the command-line tool.
 */
typedef enum MaxconvStatus {
  MAXCONV_STATUS_OK = 0,
  MAXCONV_STATUS_NULL_POINTER = 1,
  MAXCONV_STATUS_INVALID_INPUT = 2,
  MAXCONV_STATUS_NUMERIC = 3,
  MAXCONV_STATUS_NON_CONVERGENCE = 4,
  MAXCONV_STATUS_PANIC = 5,
} MaxconvStatus;

/**
 * Distance used between sites.
 */
typedef enum MaxconvMetric {
  MAXCONV_METRIC_EUCLIDEAN = 0,
  /**
   * Coordinates are latitude and longitude in degrees; distances in kilometres.
   */
  MAXCONV_METRIC_GREAT_CIRCLE_KM = 1,
} MaxconvMetric;

/**
 * Model family identifiers.
 */
typedef enum MaxconvFamily {
  MAXCONV_FAMILY_M1 = 1,
  MAXCONV_FAMILY_M2 = 2,
  MAXCONV_FAMILY_M3 = 3,
  MAXCONV_FAMILY_M4 = 4,
  MAXCONV_FAMILY_M5 = 5,
} MaxconvFamily;

/**
 * Opaque fit result.
 */
typedef struct MaxconvFit MaxconvFit;

/**
 * Opaque model parameter record.
 */
typedef struct MaxconvModel MaxconvModel;

/**
 * Opaque set of sites.
 */
typedef struct MaxconvSites MaxconvSites;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays valid
 * until the next call into this library from the same thread.
 */
const char *maxconv_last_error(void);

/**
 * Library version as a static string.
 */
const char *maxconv_version(void);

/**
 * Area of the intersection of disks of radii `r1`, `r2` at centre distance `h`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_lens_area(double r1, double r2, double h, double *out);

/**
 * Creates a site set from `count` coordinate pairs stored as `x0, y0, x1, y1, ...`.
 *
 * # Safety
 * `xy` must point to `2 * count` readable doubles and `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_sites_new(const double *xy,
                                     size_t count,
                                     enum MaxconvMetric metric,
                                     struct MaxconvSites **out);

/**
 * Number of sites.
 *
 * # Safety
 * `sites` must be a live handle or null.
 */
size_t maxconv_sites_len(const struct MaxconvSites *sites);

/**
 * # Safety
 * `sites` must be null or a handle from [`maxconv_sites_new`] not yet freed.
 */
void maxconv_sites_free(struct MaxconvSites *sites);

/**
 * Creates a model from its JSON record, as written by the command-line tool.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_model_from_json(const char *json, struct MaxconvModel **out);

/**
 * Disk model with uniform radii on `[r_lower, r_upper]` driven by a Gaussian process
 * with exponential correlation of range `theta_r`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_model_disk(double r_lower,
                                      double r_upper,
                                      double theta_r,
                                      struct MaxconvModel **out);

/**
 * JSON record of a model. Free the string with [`maxconv_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_model_to_json(const struct MaxconvModel *model, char **out);

/**
 * Family of a model.
 *
 * # Safety
 * `model` must be a live handle and `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_model_family(const struct MaxconvModel *model, enum MaxconvFamily *out);

/**
 * # Safety
 * `model` must be null or a model handle not yet freed.
 */
void maxconv_model_free(struct MaxconvModel *model);

/**
 * Bivariate copula distribution function at distance `h`.
 *
 * # Safety
 * `model` must be a live handle and `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_copula_cdf(const struct MaxconvModel *model,
                                      double h,
                                      double u1,
                                      double u2,
                                      double *out);

/**
 * Bivariate copula density at distance `h`.
 *
 * # Safety
 * `model` must be a live handle and `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_copula_pdf(const struct MaxconvModel *model,
                                      double h,
                                      double u1,
                                      double u2,
                                      double *out);

/**
 * Upper tail-dependence coefficient, Spearman's rho and lower tail order of the disk
 * model at distance `h`, written to `out[0..3]`.
 *
 * # Safety
 * `model` must be a live handle and `out` must be valid for three writes.
 */
enum MaxconvStatus maxconv_tail_summary(const struct MaxconvModel *model, double h, double *out);

/**
 * Simulates `n` replicates at `sites` into `out`, row-major `n x p`.
 *
 * # Safety
 * Handles must be live and `out` must be valid for `out_len` writes.
 */
enum MaxconvStatus maxconv_simulate(const struct MaxconvModel *model,
                                    const struct MaxconvSites *sites,
                                    size_t n,
                                    uint64_t seed,
                                    double *out,
                                    size_t out_len);

/**
 * Fits `family` to row-major `n x p` data by weighted pairwise likelihood with the
 * default parameter boxes for a domain of linear size `scale`. Data are rank
 * transformed per column.
 *
 * # Safety
 * `data` must hold `n * p` doubles where `p` is the number of sites; `out` must be
 * valid for one write.
 */
enum MaxconvStatus maxconv_fit(const double *data,
                               size_t n,
                               const struct MaxconvSites *sites,
                               enum MaxconvFamily family,
                               double d_max,
                               double scale,
                               uint64_t seed,
                               struct MaxconvFit **out);

/**
 * Maximised pairwise log-likelihood.
 *
 * # Safety
 * `fit` must be a live handle and `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_fit_objective(const struct MaxconvFit *fit, double *out);

/**
 * Fitted model as a new handle.
 *
 * # Safety
 * `fit` must be a live handle and `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_fit_model(const struct MaxconvFit *fit, struct MaxconvModel **out);

/**
 * Full fit report as JSON. Free the string with [`maxconv_string_free`].
 *
 * # Safety
 * `fit` must be a live handle and `out` must be valid for one write.
 */
enum MaxconvStatus maxconv_fit_to_json(const struct MaxconvFit *fit, char **out);

/**
 * # Safety
 * `fit` must be null or a fit handle not yet freed.
 */
void maxconv_fit_free(struct MaxconvFit *fit);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void maxconv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAXCONV_H */

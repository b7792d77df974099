#ifndef SPECTRALFLOW_H
#define SPECTRALFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Status codes returned by every fallible call.
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_INVALID_ARGUMENT = 1,
  SF_STATUS_CONFIG_ERROR = 2,
  SF_STATUS_NUMERICAL_ERROR = 3,
  SF_STATUS_NULL_POINTER = 4,
  SF_STATUS_IO = 5,
  SF_STATUS_PANIC = 6,
} SfStatus;

// Sign convention of the dependent-ensemble fixed point.
typedef enum SfConvention {
  SF_CONVENTION_SELFCONSISTENT_MINUS = 0,
  SF_CONVENTION_PAPER_PLUS = 1,
} SfConvention;

// Covariance kernel of a locally dependent ensemble.
typedef struct SfKernel SfKernel;

// A batch of fBm paths sampled on a uniform grid.
typedef struct SfPaths SfPaths;

// Sorted eigenvalues of one matrix.
typedef struct SfSpectrum SfSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *sf_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sf_version(void);

// Sample `count` fBm paths on `steps` uniform steps of `[0, t_end]`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one pointer.
enum SfStatus sf_fbm_generate(double hurst,
                              double t_end,
                              size_t steps,
                              size_t count,
                              uint64_t seed,
                              struct SfPaths **out);

// Number of paths; 0 for null.
//
// # Safety
// `paths` must be null or a live handle from [`sf_fbm_generate`].
size_t sf_paths_count(const struct SfPaths *paths);

// Values per path (`steps + 1`); 0 for null.
//
// # Safety
// `paths` must be null or a live handle from [`sf_fbm_generate`].
size_t sf_paths_width(const struct SfPaths *paths);

// Copy all values, path-major, into `buf` of capacity `len`.
//
// # Safety
// `paths` must be a live handle and `buf` must point to `len` writable doubles.
enum SfStatus sf_paths_copy(const struct SfPaths *paths, double *buf, size_t len);

// # Safety
// `paths` must be null or a handle not freed before.
void sf_paths_free(struct SfPaths *paths);

// Eigenvalues of a real symmetric `n × n` matrix given row-major.
//
// # Safety
// `data` must point to `n * n` readable doubles and `out` to storage for one pointer.
enum SfStatus sf_eigenvalues_sym(const double *data, size_t n, struct SfSpectrum **out);

// Wrap already computed values (any order) as a spectrum.
//
// # Safety
// `values` must point to `len` readable doubles and `out` to storage for one pointer.
enum SfStatus sf_spectrum_from_values(const double *values, size_t len, struct SfSpectrum **out);

// Number of eigenvalues; 0 for null.
//
// # Safety
// `s` must be null or a live spectrum handle.
size_t sf_spectrum_len(const struct SfSpectrum *s);

// Copy the ascending eigenvalues into `buf` of capacity `len`.
//
// # Safety
// `s` must be a live handle and `buf` must point to `len` writable doubles.
enum SfStatus sf_spectrum_copy(const struct SfSpectrum *s, double *buf, size_t len);

// # Safety
// `s` must be null or a handle not freed before.
void sf_spectrum_free(struct SfSpectrum *s);

// Kolmogorov–Smirnov distance to a law given by a literal id
// (`sc:<d>` or `mp:<c>:<sigma>`).
//
// # Safety
// `s` must be a live handle, `law_id` a NUL-terminated string, `out` writable.
enum SfStatus sf_ks_distance(const struct SfSpectrum *s, const char *law_id, double *out);

// Wasserstein-1 distance to a law given by a literal id.
//
// # Safety
// As [`sf_ks_distance`].
enum SfStatus sf_wasserstein1(const struct SfSpectrum *s, const char *law_id, double *out);

// Semicircle Stieltjes transform `G(z) = ∫ μ(dx)/(z − x)` of scale `d`.
//
// # Safety
// `out_re` and `out_im` must be writable.
enum SfStatus sf_gsc(double re, double im, double d, double *out_re, double *out_im);

// Marchenko–Pastur Stieltjes transform.
//
// # Safety
// `out_re` and `out_im` must be writable.
enum SfStatus sf_gmp(double re, double im, double c, double sigma, double *out_re, double *out_im);

// Kernel of the index set `{(offsets[2i], offsets[2i+1]) : weights[i]}` at
// entry spread `d`.
//
// # Safety
// `offsets` must point to `2 * len` and `weights` to `len` readable values.
enum SfStatus sf_kernel_new(const int64_t *offsets,
                            const double *weights,
                            size_t len,
                            double d,
                            struct SfKernel **out);

// Largest difference between the raw covariance table and its transpose.
//
// # Safety
// `k` must be null or a live kernel handle.
double sf_kernel_asymmetry(const struct SfKernel *k);

// # Safety
// `k` must be null or a handle not freed before.
void sf_kernel_free(struct SfKernel *k);

// Solve the self-consistent equation at `z` with default iteration
// settings. Writes `S(z)` (so that `G = −S`) and the iteration count.
//
// # Safety
// `k` must be a live handle; the output pointers must be writable.
enum SfStatus sf_dependent_fixed_point(const struct SfKernel *k,
                                       double re,
                                       double im,
                                       enum SfConvention convention,
                                       double *s_re,
                                       double *s_im,
                                       size_t *iterations);

// Run `simulate` for a JSON configuration, writing into `out_dir`.
// `workers = 0` uses every core.
//
// # Safety
// `config_json` and `out_dir` must be NUL-terminated strings.
enum SfStatus sf_simulate(const char *config_json, const char *out_dir, size_t workers);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECTRALFLOW_H */

#ifndef NBESOV_H
#define NBESOV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes.
 */
typedef enum {
  NB_STATUS_OK = 0,
  NB_STATUS_NULL_POINTER = 1,
  NB_STATUS_INVALID_ARGUMENT = 2,
  NB_STATUS_RESOLUTION = 3,
  NB_STATUS_NUMERICAL = 4,
  NB_STATUS_IO = 5,
  NB_STATUS_FORMAT = 6,
  NB_STATUS_BUFFER_TOO_SMALL = 7,
  NB_STATUS_PANIC = 8,
} NbStatus;

/**
 * Partition of unity variants.
 */
typedef enum {
  NB_PARTITION_STANDARD = 0,
  NB_PARTITION_PERTURBED = 1,
  NB_PARTITION_BROKEN = 2,
} NbPartition;

/**
 * Opaque eigenbasis handle.
 */
typedef struct NbBasis NbBasis;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *nb_last_error(void);

/**
 * Cosine basis of `[0, length]` with `k` modes on `n` cells.
 */
NbStatus nb_basis_interval(double length, size_t k, size_t n, NbBasis **out);

/**
 * Tensor cosine basis of `[0, lx] x [0, ly]` with the `k` lowest modes.
 */
NbStatus nb_basis_rectangle(double lx, double ly, size_t k, size_t nx, size_t ny, NbBasis **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string.
 */
NbStatus nb_basis_load(const char *path, NbBasis **out);

/**
 * # Safety
 * `basis` must come from this library; `path` must be NUL-terminated.
 */
NbStatus nb_basis_save(const NbBasis *basis, const char *path);

/**
 * # Safety
 * `basis` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void nb_basis_free(NbBasis *basis);

/**
 * Number of modes and grid points.
 *
 * # Safety
 * `basis` must come from this library; outputs may be null.
 */
NbStatus nb_basis_size(const NbBasis *basis, size_t *modes, size_t *points);

/**
 * Copy the eigenvalues into `out[0..cap]`; fails if `cap` is too small.
 *
 * # Safety
 * `out` must hold `cap` doubles.
 */
NbStatus nb_basis_eigenvalues(const NbBasis *basis, double *out, size_t cap);

/**
 * `phi_j(l)` for the chosen partition.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
NbStatus nb_phi_j(NbPartition partition, int32_t j, double l, double *out);

/**
 * Besov norm of grid values. With `homogeneous != 0` the homogeneous norm
 * is computed and `tail` receives the size of the blocks below the range.
 *
 * # Safety
 * `values` must hold `len` doubles, one per grid point; `value` must be
 * valid; `tail` may be null.
 */
NbStatus nb_besov_norm(const NbBasis *basis,
                       const double *values,
                       size_t len,
                       double s,
                       double p,
                       double q,
                       int32_t homogeneous,
                       NbPartition partition,
                       double *value,
                       double *tail);

/**
 * `out = e^(-tH) values`.
 *
 * # Safety
 * `values` and `out` must each hold `len` doubles.
 */
NbStatus nb_heat(const NbBasis *basis, double t, const double *values, size_t len, double *out);

/**
 * Run one experiment by id (`exp_partition`, ...). `verdict` receives the
 * CLI exit code of the verdict (0 pass, 2 inconclusive, 3 fail); `json`,
 * if not null, receives the report, to be released with
 * [`nb_string_free`].
 *
 * # Safety
 * `id` must be NUL-terminated; `verdict` must be valid.
 */
NbStatus nb_run_experiment(const char *id,
                           uint64_t seed,
                           int32_t negative_control,
                           int32_t *verdict,
                           char **json);

/**
 * # Safety
 * `s` must come from this library. Null is ignored.
 */
void nb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NBESOV_H */

#ifndef CARMICHAEL_H
#define CARMICHAEL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CmStatus {
  CM_STATUS_OK = 0,
  CM_STATUS_NULL_POINTER = 1,
  CM_STATUS_INVALID_ARGUMENT = 2,
  CM_STATUS_NOT_VERIFIED = 3,
  CM_STATUS_BUFFER_TOO_SMALL = 4,
  CM_STATUS_PANIC = 5,
} CmStatus;

/**
 * Opaque handle to a universal form.
 */
typedef struct CmForm CmForm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string.
 * Valid until the next call into this library on the same thread.
 */
const char *cm_last_error(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum CmStatus cm_form_ukl(size_t k, size_t l, struct CmForm **out);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum CmStatus cm_form_wk(size_t k, struct CmForm **out);

/**
 * Theorem form from a coefficient tuple; `k = 0` means `k = len`.
 *
 * # Safety
 * `tuple` must point to `len` readable values and `out` must be writable.
 */
enum CmStatus cm_form_theorem(const uint64_t *tuple, size_t len, size_t k, struct CmForm **out);

/**
 * # Safety
 * `alphas` must point to `len` readable values and `out` must be writable.
 */
enum CmStatus cm_form_custom(const uint64_t *alphas,
                             size_t len,
                             uint64_t substitution,
                             struct CmForm **out);

/**
 * Parses a form line `provenance k s a1,...,ak`.
 *
 * # Safety
 * `line` must be a NUL-terminated string and `out` must be writable.
 */
enum CmStatus cm_form_parse(const char *line, struct CmForm **out);

/**
 * # Safety
 * `form` must be null or a handle from a `cm_form_*` constructor, freed once.
 */
void cm_form_free(struct CmForm *form);

/**
 * Number of factors, or 0 for a null handle.
 *
 * # Safety
 * `form` must be null or a live handle.
 */
size_t cm_form_k(const struct CmForm *form);

/**
 * Substitution multiplier, or 0 for a null handle.
 *
 * # Safety
 * `form` must be null or a live handle.
 */
uint64_t cm_form_substitution(const struct CmForm *form);

/**
 * Copies the slopes into `buf`. `*len` receives `k` even when `cap` is too
 * small, in which case `CM_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `buf` must have room for `cap` values; `len` must be writable.
 */
enum CmStatus cm_form_alphas(const struct CmForm *form, uint64_t *buf, size_t cap, size_t *len);

/**
 * The form line; free it with [`cm_string_free`].
 *
 * # Safety
 * `form` must be a live handle and `out` writable.
 */
enum CmStatus cm_form_to_string(const struct CmForm *form, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void cm_string_free(char *s);

/**
 * Sets `*verified` and returns `CM_STATUS_OK` for both outcomes; an
 * inconclusive check counts as not verified.
 *
 * # Safety
 * `form` must be a live handle and `verified` writable.
 */
enum CmStatus cm_verify(const struct CmForm *form, bool *verified);

/**
 * Number of `M` in `[lo, hi]` with every factor prime. `threads = 0` uses
 * one worker per core.
 *
 * # Safety
 * `form` must be a live handle and `count` writable.
 */
enum CmStatus cm_search_count(const struct CmForm *form,
                              uint64_t lo,
                              uint64_t hi,
                              size_t threads,
                              uint64_t *count);

/**
 * The hit values `M` in ascending order; same buffer contract as
 * [`cm_form_alphas`].
 *
 * # Safety
 * `form` must be a live handle, `buf` must have room for `cap` values and
 * `len` must be writable.
 */
enum CmStatus cm_search_hits(const struct CmForm *form,
                             uint64_t lo,
                             uint64_t hi,
                             size_t threads,
                             uint64_t *buf,
                             size_t cap,
                             size_t *len);

bool cm_is_prime_u64(uint64_t n);

/**
 * Korselt's criterion for `n` with the claimed factorization. A product
 * mismatch is `CM_STATUS_INVALID_ARGUMENT`; a failed criterion sets
 * `*accepted = false`.
 *
 * # Safety
 * `factors` must point to `len` readable values and `accepted` be writable.
 */
enum CmStatus cm_korselt_u64(uint64_t n, const uint64_t *factors, size_t len, bool *accepted);

/**
 * Singular-series constant with primes up to `cutoff` (at least 100).
 *
 * # Safety
 * `form` must be a live handle and `out` writable.
 */
enum CmStatus cm_singular_constant(const struct CmForm *form, uint64_t cutoff, double *out);

/**
 * `constant · Σ_{M'≤M} ∏ 1/log(s·α_i·M' + 1)`.
 *
 * # Safety
 * `form` must be a live handle and `out` writable.
 */
enum CmStatus cm_estimate_sum(const struct CmForm *form, double constant, uint64_t m, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CARMICHAEL_H */

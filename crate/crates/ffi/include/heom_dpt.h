#ifndef HEOM_DPT_H
#define HEOM_DPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HdStatus {
  HD_STATUS_OK = 0,
  HD_STATUS_NULL_POINTER = 1,
  HD_STATUS_INVALID_ARGUMENT = 2,
  HD_STATUS_DIMENSION = 3,
  HD_STATUS_BUDGET = 4,
  HD_STATUS_NO_CONVERGENCE = 5,
  HD_STATUS_NUMERICAL = 6,
  HD_STATUS_SYMMETRY = 7,
  HD_STATUS_IO = 8,
  HD_STATUS_BUFFER_TOO_SMALL = 9,
  HD_STATUS_PANIC = 10,
} HdStatus;

typedef struct HdLiouvillian HdLiouvillian;

typedef struct HdModel HdModel;

typedef struct HdState HdState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into the library from the same thread.
const char *hd_last_error(void);

// Library version as a static NUL-terminated string.
const char *hd_version(void);

// Dissipative LMG model with collective spin `n/2`.
//
// # Safety
// `out` must be a valid pointer; the handle written there is owned by the caller.
enum HdStatus hd_model_lmg(size_t n,
                           double v,
                           double gamma,
                           double kappa,
                           double omega,
                           struct HdModel **out);

// LMG model with a transverse field `h` and Z2 parity symmetry.
//
// # Safety
// As for [`hd_model_lmg`].
enum HdStatus hd_model_z2_lmg(size_t n,
                              double v,
                              double gamma,
                              double kappa,
                              double omega,
                              double h,
                              struct HdModel **out);

// Two-mode Dicke model with `n` spins.
//
// # Safety
// As for [`hd_model_lmg`].
enum HdStatus hd_model_two_mode_dicke(size_t n,
                                      double g,
                                      double omega0,
                                      double omega,
                                      double kappa,
                                      struct HdModel **out);

// Qubit coupled to one damped mode with complex amplitude `g_re + i g_im`.
//
// # Safety
// As for [`hd_model_lmg`].
enum HdStatus hd_model_qubit_decay(double omega_q,
                                   double g_re,
                                   double g_im,
                                   double omega,
                                   double kappa,
                                   struct HdModel **out);

// System Hilbert-space dimension, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t hd_model_system_dim(const struct HdModel *model);

// # Safety
// `model` must be null or a handle not yet freed.
void hd_model_free(struct HdModel *model);

// Builds the generator truncated at total depth `k_max`.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum HdStatus hd_liouvillian_assemble(const struct HdModel *model,
                                      size_t k_max,
                                      struct HdLiouvillian **out);

// Dimension of the generator, or 0 for a null handle.
//
// # Safety
// `l` must be null or a live handle.
size_t hd_liouvillian_dim(const struct HdLiouvillian *l);

// # Safety
// `l` must be null or a handle not yet freed.
void hd_liouvillian_free(struct HdLiouvillian *l);

// Spectral gap `λ₁` of the full generator, using the default solver settings.
//
// # Safety
// `l` must be a live handle; `re` and `im` valid pointers.
enum HdStatus hd_gap(const struct HdLiouvillian *l, double *re, double *im);

// Physical steady state. Uses the charge-zero sector when the model carries a
// symmetry.
//
// # Safety
// `l` must be a live handle and `out` a valid pointer.
enum HdStatus hd_steady_state(const struct HdLiouvillian *l, struct HdState **out);

// Dimension `d` of the `d × d` density matrix, or 0 for a null handle.
//
// # Safety
// `state` must be null or a live handle.
size_t hd_state_dim(const struct HdState *state);

// Copies the density matrix row-major as interleaved `(re, im)` pairs into
// `buf`, which must hold `len >= 2 d²` doubles.
//
// # Safety
// `state` must be a live handle and `buf` valid for `len` writes.
enum HdStatus hd_state_matrix(const struct HdState *state, double *buf, size_t len);

// `Tr(ρ O)` for a named operator of the model: `I`, `Sx`, `Sy`, `Sz`, `Sp`, `Sm`.
//
// # Safety
// `state` and `model` must be live handles, `name` a NUL-terminated string,
// `re` and `im` valid pointers.
enum HdStatus hd_state_expectation(const struct HdState *state,
                                   const struct HdModel *model,
                                   const char *name,
                                   double *re,
                                   double *im);

// # Safety
// `state` must be null or a handle not yet freed.
void hd_state_free(struct HdState *state);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEOM_DPT_H */

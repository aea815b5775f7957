#ifndef AMLAB_H
#define AMLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  AMLAB_STATUS_OK = 0,
  AMLAB_STATUS_NULL_POINTER = 1,
  AMLAB_STATUS_INPUT = 2,
  AMLAB_STATUS_DOMAIN = 3,
  AMLAB_STATUS_CONFIG = 4,
  AMLAB_STATUS_NUMERICAL = 5,
  AMLAB_STATUS_IO = 6,
  AMLAB_STATUS_PANIC = 7,
} AmlabStatus;

/**
 * Opaque field of nodal values on a cube grid.
 */
typedef struct AmlabField AmlabField;

/**
 * Opaque Hamiltonian model.
 */
typedef struct AmlabModel AmlabModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *amlab_last_error(void);

/**
 * `H(p) = |p|²/2` in `dim` dimensions.
 *
 * # Safety
 * `out_model` must be a valid pointer to writable storage for one handle.
 */
AmlabStatus amlab_model_quadratic(size_t dim, AmlabModel **out_model);

/**
 * `H(p) = ⟨Ap, p⟩/2` with a symmetric positive definite `A` given row-major.
 *
 * # Safety
 * `matrix` must point to `dim * dim` readable doubles; `out_model` as above.
 */
AmlabStatus amlab_model_anisotropic(size_t dim, const double *matrix, AmlabModel **out_model);

/**
 * `H(p) = Σ ((1 + p_a²)^{α/2} − 1)/α` with convexity bounds certified on `[−w, w]ⁿ`.
 *
 * # Safety
 * `out_model` must be a valid pointer to writable storage for one handle.
 */
AmlabStatus amlab_model_separable_power(size_t dim,
                                        double alpha,
                                        double half_width,
                                        AmlabModel **out_model);

/**
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void amlab_model_free(AmlabModel *model);

/**
 * # Safety
 * `model` must be a live handle.
 */
size_t amlab_model_dim(const AmlabModel *model);

/**
 * Writes `H(p)`.
 *
 * # Safety
 * `p` must point to `len` readable doubles and `out_value` to one writable double.
 */
AmlabStatus amlab_model_value(const AmlabModel *model,
                              const double *p,
                              size_t len,
                              double *out_value);

/**
 * Writes the cone `C_σ(x) = max_{H(p) = σ} p·x`.
 *
 * # Safety
 * `x` must point to `len` readable doubles and `out_value` to one writable double.
 */
AmlabStatus amlab_model_cone(const AmlabModel *model,
                             double sigma,
                             const double *x,
                             size_t len,
                             double *out_value);

/**
 * A field on the cube `[−w, w]^dim` with `count` nodes per axis. `values`
 * holds `count^dim` entries, last axis fastest.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out_field` to writable storage.
 */
AmlabStatus amlab_field_new(size_t dim,
                            double half_width,
                            size_t count,
                            const double *values,
                            size_t len,
                            AmlabField **out_field);

/**
 * # Safety
 * `field` must be NULL or a handle not yet freed.
 */
void amlab_field_free(AmlabField *field);

/**
 * Number of nodes, or 0 for NULL.
 *
 * # Safety
 * `field` must be NULL or a live handle.
 */
size_t amlab_field_len(const AmlabField *field);

/**
 * Copies the nodal values into `buffer`, which must hold exactly
 * [`amlab_field_len`] entries.
 *
 * # Safety
 * `buffer` must point to `len` writable doubles.
 */
AmlabStatus amlab_field_values(const AmlabField *field, double *buffer, size_t len);

/**
 * Multilinear interpolation at `x`.
 *
 * # Safety
 * `x` must point to `len` readable doubles and `out_value` to one writable double.
 */
AmlabStatus amlab_field_interpolate(const AmlabField *field,
                                    const double *x,
                                    size_t len,
                                    double *out_value);

/**
 * Solves `H_{p_i}H_{p_j}u_{ij} + εΔu = 0` with the boundary values of
 * `boundary` and default solver settings. `out_iterations` may be NULL.
 *
 * # Safety
 * Handles must be live; `out_field` must point to writable storage.
 */
AmlabStatus amlab_solve(const AmlabModel *model,
                        const AmlabField *boundary,
                        double epsilon,
                        AmlabField **out_field,
                        size_t *out_iterations);

/**
 * Discounted control distance `ℒ^δ_σ(x₀, ·)` on the grid of `layout`, with
 * `x₀` at `source`, which must be a grid node.
 *
 * # Safety
 * Handles must be live; `source` must point to `len` readable doubles.
 */
AmlabStatus amlab_control_distance(const AmlabModel *model,
                                   const AmlabField *layout,
                                   double sigma,
                                   double delta,
                                   const double *source,
                                   size_t len,
                                   AmlabField **out_field);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AMLAB_H */

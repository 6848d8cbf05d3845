#ifndef HFSKY_H
#define HFSKY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HfskyStatus {
  HFSKY_STATUS_OK = 0,
  HFSKY_STATUS_NULL_POINTER = 1,
  HFSKY_STATUS_INVALID_GRID = 2,
  HFSKY_STATUS_OUT_OF_RANGE = 3,
  HFSKY_STATUS_DIMENSION_MISMATCH = 4,
  HFSKY_STATUS_INVALID_PILOT = 5,
  HFSKY_STATUS_NUMERICAL = 6,
  HFSKY_STATUS_INVALID_CONFIG = 7,
  HFSKY_STATUS_IO = 8,
  HFSKY_STATUS_PANIC = 9,
} HfskyStatus;

typedef enum HfskyAlgorithm {
  HFSKY_ALGORITHM_MMSE = 0,
  HFSKY_ALGORITHM_CBFEM = 1,
} HfskyAlgorithm;

typedef struct HfskyGrid HfskyGrid;

typedef struct HfskyOperator HfskyOperator;

typedef struct HfskyPlan HfskyPlan;

/**
 * Numeric grid inputs. `max_freq_hz <= 0` derives it from `spacing_m`.
 */
typedef struct HfskyGridParams {
  double carrier_hz;
  double max_freq_hz;
  double spacing_m;
  size_t antennas;
  size_t subcarriers;
  size_t cp_len;
  double subcarrier_spacing;
  size_t valid_subcarriers;
  size_t slots;
  size_t symbols_per_slot;
  size_t pilot_symbol;
  size_t doppler_base;
  size_t fine_angle;
  size_t fine_delay;
  size_t fine_doppler;
  bool spatial_wideband;
} HfskyGridParams;

typedef struct HfskyGridDims {
  size_t angle_bins;
  size_t delay_bins;
  size_t doppler_bins;
  size_t tb_len;
  size_t pilot_rows;
  size_t shift_slots;
} HfskyGridDims;

typedef struct HfskyComplex {
  double re;
  double im;
} HfskyComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last error on this thread, or null if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hfsky_last_error(void);

/**
 * Parameters of the built-in desk-scale grid.
 */
struct HfskyGridParams hfsky_grid_params_desk(void);

/**
 * # Safety
 * `params` must point to a valid struct and `out` to writable storage for
 * one pointer. Release the result with [`hfsky_grid_free`].
 */
enum HfskyStatus hfsky_grid_new(const struct HfskyGridParams *params, struct HfskyGrid **out);

/**
 * # Safety
 * `grid` must be null or a handle from [`hfsky_grid_new`] not yet freed.
 */
void hfsky_grid_free(struct HfskyGrid *grid);

/**
 * # Safety
 * `grid` must be a live handle; `out` must be writable.
 */
enum HfskyStatus hfsky_grid_dims(const struct HfskyGrid *grid, struct HfskyGridDims *out);

/**
 * Pilot plan from a per-terminal group index (`group_of[u]` in
 * `0..num_groups`, every group nonempty).
 *
 * # Safety
 * `grid` must be a live handle, `group_of` must hold `num_uts` values and
 * `out` must be writable. Release with [`hfsky_plan_free`].
 */
enum HfskyStatus hfsky_plan_new(const struct HfskyGrid *grid,
                                const size_t *group_of,
                                size_t num_uts,
                                double sigma_p,
                                size_t zc_root,
                                struct HfskyPlan **out);

/**
 * # Safety
 * `plan` must be null or a live handle from [`hfsky_plan_new`].
 */
void hfsky_plan_free(struct HfskyPlan *plan);

/**
 * Sensing operator for a grid and pilot plan. The handle is independent of
 * its inputs, which may be freed afterwards.
 *
 * # Safety
 * `grid` and `plan` must be live handles and `out` writable. Release with
 * [`hfsky_operator_free`].
 */
enum HfskyStatus hfsky_operator_new(const struct HfskyGrid *grid,
                                    const struct HfskyPlan *plan,
                                    struct HfskyOperator **out);

/**
 * # Safety
 * `op` must be null or a live handle from [`hfsky_operator_new`].
 */
void hfsky_operator_free(struct HfskyOperator *op);

/**
 * Row and column counts; either output may be null.
 *
 * # Safety
 * `op` must be a live handle; non-null outputs must be writable.
 */
enum HfskyStatus hfsky_operator_shape(const struct HfskyOperator *op, size_t *rows, size_t *cols);

/**
 * `y = A x` with `x` of length cols and `y` of length rows.
 *
 * # Safety
 * Buffers must hold the stated number of elements.
 */
enum HfskyStatus hfsky_operator_forward(const struct HfskyOperator *op,
                                        const struct HfskyComplex *x,
                                        size_t x_len,
                                        struct HfskyComplex *y,
                                        size_t y_len);

/**
 * `x = Aᴴ y` with `y` of length rows and `x` of length cols.
 *
 * # Safety
 * Buffers must hold the stated number of elements.
 */
enum HfskyStatus hfsky_operator_adjoint(const struct HfskyOperator *op,
                                        const struct HfskyComplex *y,
                                        size_t y_len,
                                        struct HfskyComplex *x,
                                        size_t x_len);

/**
 * Estimate beam-domain coefficients (length cols) from observation `y`.
 * `variances` holds the prior variance of every column (length cols,
 * terminal-major). `iterations` may be null.
 *
 * # Safety
 * Buffers must hold the stated number of elements.
 */
enum HfskyStatus hfsky_estimate(const struct HfskyOperator *op,
                                enum HfskyAlgorithm algorithm,
                                const double *variances,
                                size_t var_len,
                                const struct HfskyComplex *y,
                                size_t y_len,
                                double sigma_z,
                                struct HfskyComplex *h_out,
                                size_t h_len,
                                size_t *iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HFSKY_H */

#ifndef QFI_IMAGING_H
#define QFI_IMAGING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call. Zero is success.
 */
typedef enum QfiStatus {
  QFI_STATUS_OK = 0,
  QFI_STATUS_NULL_POINTER = 1,
  QFI_STATUS_INVALID_UTF8 = 2,
  QFI_STATUS_VALIDATION = 3,
  QFI_STATUS_DEGENERATE_GEOMETRY = 4,
  QFI_STATUS_SHAPE_MISMATCH = 5,
  QFI_STATUS_NOT_UNITARY = 6,
  QFI_STATUS_PRECONDITION = 7,
  QFI_STATUS_NUMERICAL = 8,
  QFI_STATUS_NON_IDENTIFIABLE = 9,
  QFI_STATUS_SATURATION = 10,
  QFI_STATUS_PARSE = 11,
  QFI_STATUS_IO = 12,
  QFI_STATUS_BUFFER_TOO_SMALL = 13,
  QFI_STATUS_PANIC = 14,
} QfiStatus;

/**
 * Which closed-form paraxial QFI matrix to evaluate.
 */
typedef enum QfiTarget {
  QFI_TARGET_SINGLE_SOURCE = 0,
  QFI_TARGET_TWO_SOURCE_SEPARATION = 1,
  QFI_TARGET_TWO_SOURCE_CENTROID = 2,
} QfiTarget;

/**
 * Opaque interferometer handle.
 */
typedef struct QfiInterferometer QfiInterferometer;

/**
 * Opaque scenario handle.
 */
typedef struct QfiScenario QfiScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *qfi_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qfi_version(void);

/**
 * Parses a TOML scenario.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QfiStatus qfi_scenario_from_toml(const char *text, struct QfiScenario **out);

/**
 * Parses a JSON scenario.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QfiStatus qfi_scenario_from_json(const char *text, struct QfiScenario **out);

/**
 * Loads one of the scenarios shipped with the library, e.g. `two_collector`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QfiStatus qfi_scenario_bundled(const char *name, struct QfiScenario **out);

/**
 * # Safety
 * `scenario` must come from a `qfi_scenario_*` constructor, or be null.
 */
void qfi_scenario_free(struct QfiScenario *scenario);

/**
 * # Safety
 * Pointers must be valid.
 */
enum QfiStatus qfi_scenario_shape(const struct QfiScenario *scenario,
                                  size_t *n_sources,
                                  size_t *n_collectors);

/**
 * Quantum Fisher information along `direction` (a preset such as
 * `separation-x` or a comma separated vector; null picks the default).
 *
 * # Safety
 * `scenario` must be a live handle, `direction` null or NUL-terminated.
 */
enum QfiStatus qfi_qfi(const struct QfiScenario *scenario, const char *direction, double *out);

/**
 * Classical Fisher information of counting behind `interferometer`.
 *
 * # Safety
 * Handles must be live, `direction` null or NUL-terminated.
 */
enum QfiStatus qfi_cfi(const struct QfiScenario *scenario,
                       const struct QfiInterferometer *interferometer,
                       const char *direction,
                       double *out);

/**
 * `identity`, `qft`, `bs` or `bs:<alpha>` on `n` ports.
 *
 * # Safety
 * `name` must be NUL-terminated and `out` valid.
 */
enum QfiStatus qfi_interferometer_builtin(const char *name,
                                          size_t n,
                                          struct QfiInterferometer **out);

/**
 * Reads the JSON form written by the command line tool.
 *
 * # Safety
 * `text` must be NUL-terminated and `out` valid.
 */
enum QfiStatus qfi_interferometer_from_json(const char *text, struct QfiInterferometer **out);

/**
 * Synthesizes the measurement for `direction` on `scenario`.
 *
 * # Safety
 * `scenario` must be live, `direction` null or NUL-terminated, `out` valid.
 */
enum QfiStatus qfi_interferometer_design(const struct QfiScenario *scenario,
                                         const char *direction,
                                         struct QfiInterferometer **out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum QfiStatus qfi_interferometer_dim(const struct QfiInterferometer *interferometer, size_t *out);

/**
 * Copies the matrix row-major into `re` and `im`, each holding `len >= dim²` doubles.
 *
 * # Safety
 * `re` and `im` must point to `len` writable doubles.
 */
enum QfiStatus qfi_interferometer_matrix(const struct QfiInterferometer *interferometer,
                                         double *re,
                                         double *im,
                                         size_t len);

/**
 * # Safety
 * `interferometer` must come from a `qfi_interferometer_*` constructor, or be null.
 */
void qfi_interferometer_free(struct QfiInterferometer *interferometer);

/**
 * Closed-form paraxial QFI matrix over `(x, y, z)`, written row-major into `out[9]`.
 * `uv` holds `n` collector positions as `u0, v0, u1, v1, ...`.
 *
 * # Safety
 * `uv` must hold `2n` doubles and `out` nine.
 */
enum QfiStatus qfi_paraxial_qfi_matrix(const double *uv,
                                       size_t n,
                                       double k,
                                       double z0,
                                       enum QfiTarget target,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFI_IMAGING_H */

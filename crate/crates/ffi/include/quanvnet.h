#ifndef QUANVNET_H
#define QUANVNET_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QnnStatus {
  QNN_STATUS_OK = 0,
  QNN_STATUS_NULL_POINTER = 1,
  QNN_STATUS_INVALID_ARGUMENT = 2,
  QNN_STATUS_CAPACITY = 3,
  QNN_STATUS_DIMENSION = 4,
  QNN_STATUS_INDEX = 5,
  QNN_STATUS_DECODE = 6,
  QNN_STATUS_CONFIG = 7,
  QNN_STATUS_VALIDATION = 8,
  QNN_STATUS_FORMAT = 9,
  QNN_STATUS_IO = 10,
  QNN_STATUS_PANIC = 11,
} QnnStatus;

/**
 * Gate identifiers accepted by [`qnn_state_apply_gate`].
 */
typedef enum QnnGateKind {
  QNN_GATE_KIND_X = 0,
  QNN_GATE_KIND_Y = 1,
  QNN_GATE_KIND_Z = 2,
  QNN_GATE_KIND_RX = 3,
  QNN_GATE_KIND_RY = 4,
  QNN_GATE_KIND_RZ = 5,
  QNN_GATE_KIND_H = 6,
  QNN_GATE_KIND_U1 = 7,
  QNN_GATE_KIND_U2 = 8,
  QNN_GATE_KIND_U3 = 9,
  QNN_GATE_KIND_CNOT = 10,
  QNN_GATE_KIND_CZ = 11,
  QNN_GATE_KIND_CRY = 12,
} QnnGateKind;

/**
 * Quanvolution filter handle.
 */
typedef struct QnnFilter QnnFilter;

/**
 * Trained model handle.
 */
typedef struct QnnModel QnnModel;

/**
 * State vector handle.
 */
typedef struct QnnState QnnState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *qnn_last_error(void);

/**
 * Creates `|0…0⟩` on `n_qubits` qubits.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum QnnStatus qnn_state_new(size_t n_qubits, struct QnnState **out);

/**
 * # Safety
 * `state` must be null or a handle from [`qnn_state_new`] not yet freed.
 */
void qnn_state_free(struct QnnState *state);

/**
 * Applies one gate. `kind` is a [`QnnGateKind`] value; controlled gates
 * take `targets = {control, target}`.
 *
 * # Safety
 * `targets` and `params` must point to `n_targets` and `n_params` readable
 * values (either may be null when its count is 0).
 */
enum QnnStatus qnn_state_apply_gate(struct QnnState *state,
                                    uint32_t kind,
                                    const size_t *targets,
                                    size_t n_targets,
                                    const double *params,
                                    size_t n_params);

/**
 * Writes `⟨Z⟩` of `qubit` to `out`.
 *
 * # Safety
 * `state` must be a live handle and `out` writable.
 */
enum QnnStatus qnn_state_expectation_z(const struct QnnState *state, size_t qubit, double *out);

/**
 * Copies the `2^n` amplitudes into `re` and `im`, which must both hold
 * `len == 2^n` values.
 *
 * # Safety
 * `re` and `im` must each point to `len` writable doubles.
 */
enum QnnStatus qnn_state_amplitudes(const struct QnnState *state,
                                    double *re,
                                    double *im,
                                    size_t len);

/**
 * Creates a 2×2, 4-qubit quanvolution filter.
 *
 * # Safety
 * `out` must be writable.
 */
enum QnnStatus qnn_filter_new(uint64_t seed,
                              size_t n_random_layers,
                              size_t n_filters,
                              struct QnnFilter **out);

/**
 * # Safety
 * `filter` must be null or a live handle.
 */
void qnn_filter_free(struct QnnFilter *filter);

/**
 * Output channels per pixel (`4 · n_filters`), or 0 for a null handle.
 *
 * # Safety
 * `filter` must be null or a live handle.
 */
size_t qnn_filter_channels(const struct QnnFilter *filter);

/**
 * Quanvolves a row-major `height × width` grayscale image with values in
 * `[0, 1]`. `out` receives `(height/2) · (width/2) · channels` floats,
 * row-major with channels last; `out_len` must equal that count.
 *
 * # Safety
 * `pixels` must hold `height·width` floats and `out` `out_len` floats.
 */
enum QnnStatus qnn_filter_apply(const struct QnnFilter *filter,
                                const float *pixels,
                                size_t height,
                                size_t width,
                                float *out,
                                size_t out_len);

/**
 * Loads a model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum QnnStatus qnn_model_load(const char *path, struct QnnModel **out);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
void qnn_model_free(struct QnnModel *model);

/**
 * Writes the per-sample input shape and the class count.
 *
 * # Safety
 * All output pointers must be writable.
 */
enum QnnStatus qnn_model_shape(const struct QnnModel *model,
                               size_t *height,
                               size_t *width,
                               size_t *channels,
                               size_t *n_classes);

/**
 * Predicts classes for `n` samples stored back to back in `inputs`
 * (`n · H · W · C` floats, channels last) into `classes`.
 *
 * # Safety
 * `inputs` must hold `n·H·W·C` floats and `classes` `n` writable values.
 */
enum QnnStatus qnn_model_predict(const struct QnnModel *model,
                                 const float *inputs,
                                 size_t n,
                                 uint32_t *classes);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qnn_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUANVNET_H */

#ifndef COSTAS_LAB_H
#define COSTAS_LAB_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Phase detector kinds.
 */
typedef enum CostasPdKind {
  COSTAS_PD_KIND_CLASSICAL = 0,
  COSTAS_PD_KIND_FOURTH_POWER = 1,
  COSTAS_PD_KIND_FOLDING = 2,
  COSTAS_PD_KIND_SINUSOIDAL_REF = 3,
  COSTAS_PD_KIND_SAWTOOTH_REF = 4,
  COSTAS_PD_KIND_TRIANGULAR_REF = 5,
} CostasPdKind;

/**
 * Result codes.
 */
typedef enum CostasStatus {
  COSTAS_STATUS_OK = 0,
  COSTAS_STATUS_NULL_POINTER = 1,
  COSTAS_STATUS_INVALID_PARAMETER = 2,
  COSTAS_STATUS_NUMERICAL_BLOW_UP = 3,
  COSTAS_STATUS_SINGULARITY = 4,
  COSTAS_STATUS_BRACKET = 5,
  COSTAS_STATUS_NOT_LOCKED = 6,
  COSTAS_STATUS_LENGTH_MISMATCH = 7,
  COSTAS_STATUS_OUT_OF_RANGE = 8,
  COSTAS_STATUS_PANIC = 9,
} CostasStatus;

/**
 * Folding lock-in regime: 1 = node case, 2 = critical, 3 = focus.
 */
typedef enum CostasRegime {
  COSTAS_REGIME_NODE = 1,
  COSTAS_REGIME_CRITICAL = 2,
  COSTAS_REGIME_FOCUS = 3,
} CostasRegime;

/**
 * Opaque waveform-level loop circuit.
 */
typedef struct CostasLoopCircuit CostasLoopCircuit;

/**
 * Opaque phase-model trajectory.
 */
typedef struct CostasTrajectory CostasTrajectory;

typedef struct CostasStepOutput {
  double i_val;
  double q_val;
  double control_g;
  double vco_phase;
} CostasStepOutput;

/**
 * Mirrors the core modem configuration. `pulse_cutoff <= 0` disables pulse
 * smoothing.
 */
typedef struct CostasModemConfig {
  double carrier_freq;
  double sample_rate;
  double symbol_rate;
  double lpf_cutoff;
  double noise_sigma;
  uint64_t seed;
  double pulse_cutoff;
} CostasModemConfig;

typedef struct CostasLoopDesign {
  double k_vco;
  double tau1;
  double tau2;
  double freq_offset;
} CostasLoopDesign;

typedef struct CostasSerPoint {
  double snr_db;
  uint64_t symbols;
  uint64_t errors;
  double ser;
  double ci_low;
  double ci_high;
  /**
   * 1 when the loop locked during warm-up.
   */
  uint8_t locked;
} CostasSerPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL,
 * or 0 when there is none.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
size_t costas_last_error_message(char *buf, size_t len);

/**
 * Detector gain `K_pd` of a kind (1 for the reference shapes).
 */
double costas_pd_gain(enum CostasPdKind kind);

/**
 * Evaluate a detector characteristic `K_pd·φ(θe)`.
 *
 * # Safety
 * `value` must be null or valid for writes.
 */
enum CostasStatus costas_pd_eval(enum CostasPdKind kind, double theta_e, double *value);

/**
 * Maximum normalized deviation between two characteristics on an
 * `n_samples` grid over one period.
 *
 * # Safety
 * `value` must be null or valid for writes.
 */
enum CostasStatus costas_pd_max_deviation(enum CostasPdKind a,
                                          enum CostasPdKind b,
                                          size_t n_samples,
                                          double *value);

/**
 * Stable lock point of a detector inside `[−π/4, π/4)`.
 */
double costas_pd_stable_zero(enum CostasPdKind kind);

/**
 * Closed-form lock-in range of the classical loop.
 *
 * # Safety
 * `omega_l` must be null or valid for writes.
 */
enum CostasStatus costas_lockin_classical(double k_vco, double tau1, double tau2, double *omega_l);

/**
 * Closed-form lock-in range of the folding loop and its regime.
 *
 * # Safety
 * `omega_l` and `regime` must be null or valid for writes.
 */
enum CostasStatus costas_lockin_folding(double k_vco,
                                        double k_pd,
                                        double tau1,
                                        double tau2,
                                        double *omega_l,
                                        enum CostasRegime *regime);

/**
 * Cycle-slip bisection estimate of the lock-in range.
 *
 * # Safety
 * `omega_l` must be null or valid for writes.
 */
enum CostasStatus costas_lockin_numeric(enum CostasPdKind kind,
                                        double k_vco,
                                        double tau1,
                                        double tau2,
                                        double tolerance,
                                        double *omega_l);

/**
 * Integrate the phase model after a frequency step of `offset` rad/s.
 *
 * # Safety
 * `handle` must be null or valid for writes. The returned handle must be
 * released with [`costas_trajectory_free`].
 */
enum CostasStatus costas_simulate(enum CostasPdKind kind,
                                  double k_vco,
                                  double offset,
                                  double tau1,
                                  double tau2,
                                  double theta0,
                                  double x0,
                                  double dt,
                                  double t_end,
                                  size_t record_every,
                                  struct CostasTrajectory **handle);

/**
 * Number of recorded samples (0 for a null handle).
 *
 * # Safety
 * `handle` must be null or a live trajectory handle.
 */
size_t costas_trajectory_len(const struct CostasTrajectory *handle);

/**
 * Read sample `index` of a trajectory.
 *
 * # Safety
 * `handle` must be null or live; output pointers null or valid for writes.
 */
enum CostasStatus costas_trajectory_get(const struct CostasTrajectory *handle,
                                        size_t index,
                                        double *t,
                                        double *theta_e,
                                        double *x);

/**
 * Lock/slip flags and the net number of slipped periods.
 *
 * # Safety
 * `handle` must be null or live; output pointers null or valid for writes.
 */
enum CostasStatus costas_trajectory_status(const struct CostasTrajectory *handle,
                                           uint8_t *locked,
                                           uint8_t *slipped,
                                           int64_t *periods_slipped);

/**
 * # Safety
 * `handle` must be null or a handle from [`costas_simulate`] not yet freed.
 */
void costas_trajectory_free(struct CostasTrajectory *handle);

/**
 * Create a waveform loop circuit. `omega_ref` is the carrier, `omega_free`
 * the VCO free-running frequency, `dt` the sample period.
 *
 * # Safety
 * `handle` must be null or valid for writes. Release the result with
 * [`costas_circuit_free`].
 */
enum CostasStatus costas_circuit_new(enum CostasPdKind kind,
                                     double k_vco,
                                     double omega_ref,
                                     double omega_free,
                                     double tau1,
                                     double tau2,
                                     double lpf_cutoff,
                                     double dt,
                                     struct CostasLoopCircuit **handle);

/**
 * Feed one input sample.
 *
 * # Safety
 * `handle` must be a live circuit; `result` null or valid for writes.
 */
enum CostasStatus costas_circuit_step(struct CostasLoopCircuit *handle,
                                      double sample,
                                      struct CostasStepOutput *result);

/**
 * # Safety
 * `handle` must be null or a handle from [`costas_circuit_new`] not yet freed.
 */
void costas_circuit_free(struct CostasLoopCircuit *handle);

/**
 * Fill `buf` with `len` input samples for `symbols` (values 1, 3, 5, 7);
 * `len` must equal `n_symbols × sample_rate / symbol_rate`.
 *
 * # Safety
 * `config` and `symbols` must be valid for reads, `buf` for `len` writes.
 */
enum CostasStatus costas_generate_qpsk(const struct CostasModemConfig *config,
                                       const uint8_t *symbols,
                                       size_t n_symbols,
                                       double *buf,
                                       size_t len);

/**
 * Monte-Carlo SER of one circuit at one SNR.
 *
 * # Safety
 * `config` and `design` must be valid for reads, `result` for writes.
 */
enum CostasStatus costas_measure_ser(enum CostasPdKind kind,
                                     const struct CostasModemConfig *config,
                                     const struct CostasLoopDesign *design,
                                     size_t warmup_symbols,
                                     double snr_db,
                                     size_t n_symbols,
                                     struct CostasSerPoint *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COSTAS_LAB_H */

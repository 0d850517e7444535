#ifndef SEQDETECT_H
#define SEQDETECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SdStatus {
  SD_STATUS_OK = 0,
  SD_STATUS_VALIDATION = 1,
  SD_STATUS_IO = 2,
  SD_STATUS_NULL_POINTER = 3,
  SD_STATUS_DOMAIN = 4,
  SD_STATUS_DEGENERATE = 5,
  SD_STATUS_UNDEFINED = 6,
  SD_STATUS_PANIC = 7,
} SdStatus;

/**
 * Fitted kNN calibration.
 */
typedef struct SdCalibration SdCalibration;

/**
 * Streaming CUSUM detector.
 */
typedef struct SdCusum SdCusum;

/**
 * Precision, recall and F1 with the underlying counts.
 */
typedef struct SdPrf {
  double precision;
  double recall;
  double f1;
  double tp;
  double fp;
  double fn_;
} SdPrf;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *sd_last_error(void);

/**
 * Lambert W. `branch` is 0 for the principal branch and -1 for the lower one.
 *
 * # Safety
 * `out_w` must be null or point to writable memory for one `double`.
 */
enum SdStatus sd_lambert_w(double x, int32_t branch, double *out_w);

/**
 * Volume of the unit ball in `m` dimensions.
 *
 * # Safety
 * `out_v` must be null or writable.
 */
enum SdStatus sd_ball_volume(uintptr_t m, double *out_v);

/**
 * # Safety
 * `out_omega0` must be null or writable.
 */
enum SdStatus sd_compute_omega0(uintptr_t m, double d_alpha, double phi, double *out_omega0);

/**
 * # Safety
 * `out_h` must be null or writable.
 */
enum SdStatus sd_calibrate_threshold(double far_target, double omega0, double *out_h);

/**
 * Upper bound `e^{-omega0 h}` on the false-alarm rate.
 */
double sd_far_bound(double h, double omega0);

/**
 * Fits a kNN calibration on `rows x dims` row-major nominal features.
 *
 * # Safety
 * `data` must hold `rows * dims` doubles; `out_handle` must be writable.
 */
enum SdStatus sd_calibration_fit(const double *data,
                                 uintptr_t rows,
                                 uintptr_t dims,
                                 uintptr_t k,
                                 double alpha,
                                 double split_ratio,
                                 uint64_t seed,
                                 struct SdCalibration **out_handle);

/**
 * # Safety
 * `handle` must come from `sd_calibration_fit` and not be used afterwards.
 */
void sd_calibration_free(struct SdCalibration *handle);

/**
 * # Safety
 * `handle` must be live; outputs must be null or writable.
 */
enum SdStatus sd_calibration_params(const struct SdCalibration *handle,
                                    double *out_d_alpha,
                                    double *out_phi,
                                    uintptr_t *out_dims);

/**
 * Evidence `d^m - d_alpha^m` for one feature vector of length `dims`.
 *
 * # Safety
 * `handle` must be live, `x` must hold `dims` doubles, `out_d` writable.
 */
enum SdStatus sd_calibration_evidence(const struct SdCalibration *handle,
                                      const double *x,
                                      uintptr_t dims,
                                      double *out_d);

/**
 * # Safety
 * `handle` must be live and `out_omega0` writable.
 */
enum SdStatus sd_calibration_omega0(const struct SdCalibration *handle, double *out_omega0);

/**
 * # Safety
 * `out_handle` must be writable.
 */
enum SdStatus sd_cusum_new(double threshold, struct SdCusum **out_handle);

/**
 * Feeds one evidence value; `out_alarm` is set to 1 when an alarm fires.
 *
 * # Safety
 * `handle` must be live and `out_alarm` writable.
 */
enum SdStatus sd_cusum_push(struct SdCusum *handle, double d, uint8_t *out_alarm);

/**
 * # Safety
 * `handle` must be live and `out_s` writable.
 */
enum SdStatus sd_cusum_statistic(const struct SdCusum *handle, double *out_s);

/**
 * # Safety
 * `handle` must come from `sd_cusum_new` and not be used afterwards.
 */
void sd_cusum_free(struct SdCusum *handle);

/**
 * Average detection delay of strictly increasing alarm times against 0/1
 * labels of length `len`.
 *
 * # Safety
 * Arrays must hold the stated number of elements; `out_add` writable.
 */
enum SdStatus sd_average_detection_delay(const uintptr_t *alarms,
                                         uintptr_t n_alarms,
                                         const uint8_t *labels_ptr,
                                         uintptr_t len,
                                         uintptr_t delta_max,
                                         double *out_add);

/**
 * # Safety
 * Arrays must hold the stated number of elements; `out_precision` writable.
 */
enum SdStatus sd_sequence_alarm_precision(const uintptr_t *alarms,
                                          uintptr_t n_alarms,
                                          const uint8_t *labels_ptr,
                                          uintptr_t len,
                                          uintptr_t delta_max,
                                          double *out_precision);

/**
 * Point-adjusted scores of 0/1 predictions.
 *
 * # Safety
 * Both arrays must hold `len` bytes; `out_prf` writable.
 */
enum SdStatus sd_adjusted_prf(const uint8_t *pred,
                              const uint8_t *truth,
                              uintptr_t len,
                              struct SdPrf *out_prf);

/**
 * Plain instance-level scores of 0/1 predictions.
 *
 * # Safety
 * Both arrays must hold `len` bytes; `out_prf` writable.
 */
enum SdStatus sd_instance_prf(const uint8_t *pred,
                              const uint8_t *truth,
                              uintptr_t len,
                              struct SdPrf *out_prf);

/**
 * Expected point-adjusted scores of Random Guess; the count fields hold
 * expectations.
 *
 * # Safety
 * `lengths` must hold `n_segments` values; `out_prf` writable.
 */
enum SdStatus sd_expected_adjusted_pr(double p,
                                      const uintptr_t *lengths,
                                      uintptr_t n_segments,
                                      uintptr_t n_nominal,
                                      struct SdPrf *out_prf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEQDETECT_H */

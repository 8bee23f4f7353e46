#ifndef LANESEL_H
#define LANESEL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define LANESEL_BEACON_LEN 100

#define LANESEL_PIGGYBACK_LEN 60

#define LANESEL_ODA_LEN 512

typedef enum LaneselStatus {
  LANESEL_STATUS_OK = 0,
  LANESEL_STATUS_NULL_POINTER = 1,
  LANESEL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Bytes did not decode, or a field is out of range for encoding.
   */
  LANESEL_STATUS_CODEC = 3,
  LANESEL_STATUS_OUT_OF_RANGE = 4,
  /**
   * The roadside unit refused the request.
   */
  LANESEL_STATUS_REJECTED = 5,
  LANESEL_STATUS_RUN_FAILED = 6,
  LANESEL_STATUS_NO_DATA = 7,
  LANESEL_STATUS_PANIC = 8,
} LaneselStatus;

/**
 * Opaque roadside unit.
 */
typedef struct LaneselRsu LaneselRsu;

/**
 * Opaque results of one scenario run.
 */
typedef struct LaneselRunMetrics LaneselRunMetrics;

/**
 * Decoded safety beacon. Speeds and positions use the wire units.
 */
typedef struct LaneselBeacon {
  uint32_t seq;
  uint16_t interval_ms;
  uint64_t timestamp_ms;
  uint64_t elp;
  int32_t pos_x_cm;
  int32_t pos_y_cm;
  int16_t speed_cms;
  uint16_t dir_cdeg;
  int16_t max_p_cdbm;
  int16_t min_p_cdbm;
  int16_t pow_u_cdbm;
  uint8_t piggyback[LANESEL_PIGGYBACK_LEN];
} LaneselBeacon;

/**
 * Counters of one run.
 */
typedef struct LaneselRunSummary {
  uint32_t vehicle_count;
  uint64_t traversals;
  uint64_t lane_changes;
  uint64_t lane_change_aborts;
  uint64_t odas_issued;
  uint64_t odas_answered;
  uint64_t beacons_sent;
  uint64_t beacons_delivered;
  double beacon_delivery_ratio;
  uint64_t audit_violations;
} LaneselRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *lanesel_last_error_message(void);

/**
 * Encodes `beacon` into the 100 bytes at `out`.
 *
 * # Safety
 * `beacon` must point to a valid struct and `out` to 100 writable bytes.
 */
enum LaneselStatus lanesel_beacon_encode(const struct LaneselBeacon *beacon, uint8_t *out);

/**
 * Decodes a 100-byte beacon.
 *
 * # Safety
 * `data` must be valid for `len` bytes and `out` must be writable.
 */
enum LaneselStatus lanesel_beacon_decode(const uint8_t *data,
                                         size_t len,
                                         struct LaneselBeacon *out);

/**
 * Creates a roadside unit at (`x_m`, `y_m`) on the default corridor.
 *
 * # Safety
 * `out` must be writable.
 */
enum LaneselStatus lanesel_rsu_new(double x_m,
                                   double y_m,
                                   double coverage_radius_m,
                                   struct LaneselRsu **out);

/**
 * # Safety
 * `rsu` must be null or a handle from [`lanesel_rsu_new`] not yet freed.
 */
void lanesel_rsu_free(struct LaneselRsu *rsu);

/**
 * Feeds one encoded beacon heard at `now_ms`. Duplicates and
 * out-of-order beacons are dropped and still return `Ok`.
 *
 * # Safety
 * `rsu` must be a live handle and `data` valid for `len` bytes.
 */
enum LaneselStatus lanesel_rsu_ingest(struct LaneselRsu *rsu,
                                      const uint8_t *data,
                                      size_t len,
                                      uint64_t now_ms);

/**
 * Drops records not refreshed within the expiry window.
 *
 * # Safety
 * `rsu` must be a live handle.
 */
enum LaneselStatus lanesel_rsu_expire(struct LaneselRsu *rsu, uint64_t now_ms);

/**
 * # Safety
 * `rsu` must be a live handle and `out` writable.
 */
enum LaneselStatus lanesel_rsu_vehicle_count(const struct LaneselRsu *rsu, size_t *out);

/**
 * Answers an encoded 512-byte ODA request with a 512-byte response
 * written to `out`. The decider's beacon is ingested first.
 *
 * # Safety
 * `rsu` must be a live handle, `request` valid for `len` bytes and `out`
 * valid for 512 writable bytes.
 */
enum LaneselStatus lanesel_rsu_handle_oda(struct LaneselRsu *rsu,
                                          const uint8_t *request,
                                          size_t len,
                                          uint64_t now_ms,
                                          uint8_t *out);

/**
 * Runs a scenario described by a NUL-terminated TOML string.
 *
 * # Safety
 * `config_toml` must be a valid C string and `out` writable.
 */
enum LaneselStatus lanesel_run_scenario(const char *config_toml, struct LaneselRunMetrics **out);

/**
 * # Safety
 * `metrics` must be null or a handle from [`lanesel_run_scenario`] not yet freed.
 */
void lanesel_metrics_free(struct LaneselRunMetrics *metrics);

/**
 * Mean traversal time in seconds; `NoData` when no traversal completed.
 *
 * # Safety
 * `metrics` must be a live handle and `out` writable.
 */
enum LaneselStatus lanesel_metrics_mean_travel_time(const struct LaneselRunMetrics *metrics,
                                                    double *out);

/**
 * # Safety
 * `metrics` must be a live handle and `out` writable.
 */
enum LaneselStatus lanesel_metrics_summary(const struct LaneselRunMetrics *metrics,
                                           struct LaneselRunSummary *out);

/**
 * Per-run CSV as a new string; release it with [`lanesel_string_free`].
 *
 * # Safety
 * `metrics` must be a live handle and `out` writable.
 */
enum LaneselStatus lanesel_metrics_csv(const struct LaneselRunMetrics *metrics, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void lanesel_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANESEL_H */

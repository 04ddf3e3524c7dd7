#ifndef STAR_RIS_AOI_H
#define STAR_RIS_AOI_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum SraStatus {
  SRA_STATUS_OK = 0,
  SRA_STATUS_NULL_POINTER = 1,
  SRA_STATUS_INVALID_UTF8 = 2,
  SRA_STATUS_CONFIG = 3,
  SRA_STATUS_IO = 4,
  SRA_STATUS_SOLVER = 5,
  SRA_STATUS_OUT_OF_RANGE = 6,
  SRA_STATUS_PANIC = 7,
} SraStatus;

/**
 * Opaque configuration handle.
 */
typedef struct SraConfig SraConfig;

/**
 * Opaque handle to one simulated episode.
 */
typedef struct SraEpisode SraEpisode;

/**
 * Episode figures of merit. `min_harvested_energy` is NaN when no slot
 * had optimal status.
 */
typedef struct SraMetrics {
  double avg_sum_aoi;
  double min_harvested_energy;
  double delivery_rate_t;
  double delivery_rate_r;
  double infeasible_fraction;
  double mean_ao_iterations;
} SraMetrics;

/**
 * Slot status codes: 0 optimal, 1 infeasible, 2 iteration cap reached.
 */
typedef struct SraSlot {
  uint64_t age_t;
  uint64_t age_r;
  bool scheduled_t;
  bool scheduled_r;
  bool delivered_t;
  bool delivered_r;
  double snr_t;
  double snr_r;
  double energy_t;
  double energy_r;
  uint32_t status;
  uint32_t ao_iterations;
} SraSlot;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *sra_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sra_version(void);

/**
 * New configuration with default settings. Free with [`sra_config_free`].
 */
struct SraConfig *sra_config_default(void);

/**
 * Parses configuration text into a new handle.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SraStatus sra_config_parse(const char *text_ptr, struct SraConfig **out);

/**
 * Loads a configuration file into a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SraStatus sra_config_load(const char *path, struct SraConfig **out);

/**
 * Sets one `key = value` setting. The handle is unchanged on failure.
 *
 * # Safety
 * `config` must come from this library; `key` and `value` must be
 * NUL-terminated strings.
 */
enum SraStatus sra_config_set(struct SraConfig *config, const char *key, const char *value);

/**
 * # Safety
 * `config` must come from this library and not be used afterwards.
 */
void sra_config_free(struct SraConfig *config);

/**
 * Runs one episode for Monte Carlo index `run` under `mode` ("es", "ms",
 * "conv" or "random").
 *
 * # Safety
 * `config` must come from this library, `mode` must be a NUL-terminated
 * string and `out` a valid pointer.
 */
enum SraStatus sra_run_episode(const struct SraConfig *config,
                               const char *mode,
                               uint64_t run,
                               struct SraEpisode **out);

/**
 * Number of slots in the episode, or 0 for null.
 *
 * # Safety
 * `episode` must be null or come from this library.
 */
size_t sra_episode_len(const struct SraEpisode *episode);

/**
 * # Safety
 * `episode` must come from this library and `out` be a valid pointer.
 */
enum SraStatus sra_episode_metrics(const struct SraEpisode *episode, struct SraMetrics *out);

/**
 * Copies slot `index` (0-based) into `out`.
 *
 * # Safety
 * `episode` must come from this library and `out` be a valid pointer.
 */
enum SraStatus sra_episode_slot(const struct SraEpisode *episode,
                                size_t index,
                                struct SraSlot *out);

/**
 * # Safety
 * `episode` must come from this library and not be used afterwards.
 */
void sra_episode_free(struct SraEpisode *episode);

/**
 * Runs the configured modes and sweep and writes `results.csv`,
 * `summary.csv` and `manifest.txt` into `out_dir`. `rows` may be null.
 *
 * # Safety
 * `config` must come from this library and `out_dir` be a NUL-terminated
 * string.
 */
enum SraStatus sra_execute(const struct SraConfig *config, const char *out_dir, size_t *rows);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STAR_RIS_AOI_H */

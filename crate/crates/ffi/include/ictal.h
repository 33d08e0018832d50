#ifndef ICTAL_H
#define ICTAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IctalStatus {
  ICTAL_STATUS_OK = 0,
  ICTAL_STATUS_NULL_POINTER = 1,
  // Bad parameter, configuration key or value, or a call out of order.
  ICTAL_STATUS_INVALID_ARGUMENT = 2,
  ICTAL_STATUS_IO = 3,
  // Malformed file contents.
  ICTAL_STATUS_FORMAT = 4,
  // Input data the pipeline cannot process.
  ICTAL_STATUS_DATA = 5,
  ICTAL_STATUS_INTERNAL = 6,
  // A Rust panic was caught at the boundary.
  ICTAL_STATUS_PANIC = 7,
} IctalStatus;

typedef enum IctalLabel {
  ICTAL_LABEL_BACKGROUND = 0,
  ICTAL_LABEL_SEIZURE = 1,
} IctalLabel;

typedef struct IctalConfig IctalConfig;

typedef struct IctalDetector IctalDetector;

typedef struct IctalEvents IctalEvents;

typedef struct IctalStream IctalStream;

typedef struct IctalEvent {
  double start_sec;
  double stop_sec;
  enum IctalLabel label;
  // Mean seizure posterior over the windows behind the event.
  double confidence;
} IctalEvent;

// Scores are percentages; an undefined ratio (empty denominator) is NaN.
typedef struct IctalScore {
  double sensitivity_pct;
  double specificity_pct;
  double fa_per_24h;
  uint64_t true_positives;
  uint64_t false_positives;
  uint64_t false_negatives;
  uint64_t true_negatives;
  double total_dur_sec;
} IctalScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ictal_version(void);

// Static description of a status code.
const char *ictal_status_string(enum IctalStatus status);

// Copies the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `len > 0`) and returns its full length in
// bytes, excluding the terminator. Returns 0 when there is no message.
// Pass a null `buf` to query the length.
size_t ictal_last_error_message(char *buf, size_t len);

// A configuration holding the defaults.
enum IctalStatus ictal_config_new(struct IctalConfig **out);

// Parses a `key = value` configuration file.
enum IctalStatus ictal_config_from_file(const char *path, struct IctalConfig **out);

// Sets one configuration key, with the same names and syntax as the file.
enum IctalStatus ictal_config_set(struct IctalConfig *cfg, const char *key, const char *value);

void ictal_config_free(struct IctalConfig *cfg);

// Loads a model file. Its input size must match the configuration's
// `image_size` when used in a stream.
enum IctalStatus ictal_detector_load(const char *path, struct IctalDetector **out);

// Side length of the square images the detector expects.
enum IctalStatus ictal_detector_input_size(const struct IctalDetector *det, size_t *out);

// Seizure probability of one row-major 8-bit image of
// `input_size x input_size` pixels.
enum IctalStatus ictal_detector_predict(const struct IctalDetector *det,
                                        const uint8_t *pixels,
                                        size_t height,
                                        size_t width,
                                        double *p_seiz);

void ictal_detector_free(struct IctalDetector *det);

// Starts a streaming session. `channel_names` lists the input channels in
// frame order; the configuration is copied and the detector shared, so
// both may be freed afterwards.
enum IctalStatus ictal_stream_new(const struct IctalConfig *cfg,
                                  const struct IctalDetector *det,
                                  const char *const *channel_names,
                                  size_t n_channels,
                                  double sample_rate_hz,
                                  struct IctalStream **out);

// Pushes `n_frames` frames of interleaved samples (`n_frames * n_channels`
// values, frame-major).
enum IctalStatus ictal_stream_push(struct IctalStream *stream,
                                   const double *samples,
                                   size_t n_frames);

// Marks the end of input and releases the remaining decisions.
enum IctalStatus ictal_stream_finish(struct IctalStream *stream);

// Takes the next decided event, if any. `*available` is set to 1 and
// `*event` filled when one was ready, otherwise `*available` is 0.
enum IctalStatus ictal_stream_next_event(struct IctalStream *stream,
                                         struct IctalEvent *event,
                                         int32_t *available);

// Number of windows classified so far.
enum IctalStatus ictal_stream_window_count(const struct IctalStream *stream, size_t *out);

// The complete hypothesis, padded with background to the input duration.
// Only valid after `ictal_stream_finish`.
enum IctalStatus ictal_stream_hypothesis(const struct IctalStream *stream,
                                         struct IctalEvents **out);

void ictal_stream_free(struct IctalStream *stream);

// Reads an annotation file.
enum IctalStatus ictal_events_read(const char *path, struct IctalEvents **out);

enum IctalStatus ictal_events_write(const struct IctalEvents *events, const char *path);

enum IctalStatus ictal_events_len(const struct IctalEvents *events, size_t *out);

enum IctalStatus ictal_events_get(const struct IctalEvents *events,
                                  size_t index,
                                  struct IctalEvent *out);

void ictal_events_free(struct IctalEvents *events);

// Any-overlap scoring. Both lists must cover the same duration.
enum IctalStatus ictal_score_ovlp(const struct IctalEvents *reference,
                                  const struct IctalEvents *hypothesis,
                                  struct IctalScore *out);

// Fixed-epoch scoring with epochs of `epoch_sec` seconds.
enum IctalStatus ictal_score_epoch(const struct IctalEvents *reference,
                                   const struct IctalEvents *hypothesis,
                                   double epoch_sec,
                                   struct IctalScore *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICTAL_H */

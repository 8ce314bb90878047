/* textnoise C API. Generated by cbindgen; do not edit by hand. */

#ifndef TEXTNOISE_H
#define TEXTNOISE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by fallible operations.
 */
typedef enum TnStatus {
  TN_OK = 0,
  /**
   * A required pointer argument was null.
   */
  TN_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  TN_INVALID_UTF8 = 2,
  /**
   * An argument was out of range or otherwise unusable.
   */
  TN_INVALID_ARGUMENT = 3,
  /**
   * The underlying file could not be read or written.
   */
  TN_IO_ERROR = 4,
  /**
   * The input parsed but its content was invalid.
   */
  TN_DATA_ERROR = 5,
} TnStatus;

/**
 * Opaque handle over a configured noise channel.
 */
typedef struct TnChannel TnChannel;

/**
 * Opaque handle over classifier parameters.
 */
typedef struct TnClassifier TnClassifier;

/**
 * Opaque handle over a token-level confusion matrix.
 */
typedef struct TnMatrix TnMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the library as a static string; never freed.
 */
const char *tn_version(void);

/**
 * Message of the last error on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *tn_last_error(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer previously returned by a `tn_*` function
 * that documents `tn_string_free`, not yet freed.
 */
void tn_string_free(char *s);

/**
 * Estimates a confusion matrix from a `clean<TAB>noisy` tsv corpus.
 * Returns null on failure (see `tn_last_error`).
 *
 * # Safety
 * `pairs_path` must be a valid NUL-terminated string.
 */
struct TnMatrix *tn_matrix_fit(const char *pairs_path, double floor);

/**
 * Loads a serialized confusion matrix. Returns null on failure.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
struct TnMatrix *tn_matrix_load(const char *path);

/**
 * Writes the matrix to `path` as deterministic JSON.
 *
 * # Safety
 * `matrix` must be a live handle; `path` a valid NUL-terminated string.
 */
enum TnStatus tn_matrix_save(const struct TnMatrix *matrix, const char *path);

/**
 * Number of symbols in the matrix vocabulary, epsilon included.
 * Returns 0 for a null handle.
 *
 * # Safety
 * `matrix` must be null or a live handle.
 */
size_t tn_matrix_vocab_size(const struct TnMatrix *matrix);

/**
 * # Safety
 * `matrix` must be null or a handle not yet freed.
 */
void tn_matrix_free(struct TnMatrix *matrix);

/**
 * Loads a classifier checkpoint. Returns null on failure.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
struct TnClassifier *tn_classifier_load(const char *path);

/**
 * Probability that `text` is a positive, written to `out_prob`.
 *
 * # Safety
 * `classifier` must be a live handle, `text` a valid NUL-terminated
 * string, `out_prob` a writable pointer.
 */
enum TnStatus tn_classifier_prob(const struct TnClassifier *classifier,
                                 const char *text,
                                 double *out_prob);

/**
 * Hard 0/1 decision at `threshold`, written to `out_label`.
 *
 * # Safety
 * Same contract as [`tn_classifier_prob`].
 */
enum TnStatus tn_classifier_predict(const struct TnClassifier *classifier,
                                    const char *text,
                                    double threshold,
                                    int *out_label);

/**
 * # Safety
 * `classifier` must be null or a handle not yet freed.
 */
void tn_classifier_free(struct TnClassifier *classifier);

/**
 * Rule channel over a fitted matrix.
 *
 * # Safety
 * `matrix` must be a live handle.
 */
struct TnChannel *tn_channel_rule(const struct TnMatrix *matrix, uint64_t seed);

/**
 * Uniform random-edit channel; `vocab` is the replacement alphabet as a
 * UTF-8 string of scalars.
 *
 * # Safety
 * `vocab` must be a valid NUL-terminated string.
 */
struct TnChannel *tn_channel_random(const char *vocab, double rate, uint64_t seed);

/**
 * Context-conditioned channel fitted on a `clean<TAB>noisy` tsv corpus.
 *
 * # Safety
 * `pairs_path` must be a valid NUL-terminated string.
 */
struct TnChannel *tn_channel_context(const char *pairs_path,
                                     double lambda,
                                     double floor,
                                     uint64_t seed);

/**
 * Greedy attack channel guided by a trained classifier. `max_edits` of 0
 * selects the default budget (one edit per ten tokens, at least one);
 * `sample_mode` of 0 substitutes the argmax confusable, nonzero samples
 * proportionally.
 *
 * # Safety
 * `matrix` and `scorer` must be live handles.
 */
struct TnChannel *tn_channel_attack(const struct TnMatrix *matrix,
                                    const struct TnClassifier *scorer,
                                    size_t max_edits,
                                    int sample_mode,
                                    uint64_t seed);

/**
 * Escape hatch: a pre-generated `clean<TAB>noisy` tsv used as a channel.
 *
 * # Safety
 * `tsv_path` must be a valid NUL-terminated string.
 */
struct TnChannel *tn_channel_file(const char *tsv_path);

/**
 * Static name of the channel kind ("rule", "attack", ...); never freed.
 *
 * # Safety
 * `channel` must be null or a live handle.
 */
const char *tn_channel_tag(const struct TnChannel *channel);

/**
 * Injects noise into `text`. The `(sentence_id, rep)` pair selects the
 * deterministic random stream, so identical inputs give identical output.
 * Returns a new string to release with `tn_string_free`, or null on
 * failure.
 *
 * # Safety
 * `channel` must be a live handle and `text` a valid NUL-terminated
 * string.
 */
char *tn_channel_inject(const struct TnChannel *channel,
                        const char *text,
                        uint64_t sentence_id,
                        uint64_t rep);

/**
 * # Safety
 * `channel` must be null or a handle not yet freed.
 */
void tn_channel_free(struct TnChannel *channel);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEXTNOISE_H */

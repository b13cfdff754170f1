/* C ABI for the reviewkit corpus-analytics library. */

#ifndef REVIEWKIT_H
#define REVIEWKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum RkStatus {
  RkOk = 0,
  RkErrNullPointer = 1,
  RkErrUtf8 = 2,
  RkErrIo = 3,
  RkErrInvalid = 4,
  RkErrBufferTooSmall = 5,
} RkStatus;

/**
 * Vocabulary projection selector for model training.
 */
typedef enum RkVocabulary {
  RkVocabQualitative = 0,
  RkVocabContent = 1,
} RkVocabulary;

/**
 * Opaque review collection handle.
 */
typedef struct RkCorpus RkCorpus;

/**
 * Opaque topic model handle; keeps its training documents so coherence
 * can be evaluated against them.
 */
typedef struct RkModel RkModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread; valid until the next failing call.
 */
const char *rk_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rk_version(void);

/**
 * Load a corpus from a JSONL file (course records allowed inline).
 * On success `*out` owns the handle; free with `rk_corpus_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RkStatus rk_corpus_load(const char *path, struct RkCorpus **out);

/**
 * # Safety
 * `handle` must come from a corpus-producing call and not be freed twice.
 */
void rk_corpus_free(struct RkCorpus *handle);

/**
 * # Safety
 * `handle` must be a live corpus handle.
 */
size_t rk_corpus_review_count(const struct RkCorpus *handle);

/**
 * # Safety
 * `handle` must be a live corpus handle.
 */
size_t rk_corpus_course_count(const struct RkCorpus *handle);

/**
 * Keep only reviews in `language` (BCP-47-style code).
 *
 * # Safety
 * `handle` must be live; `language` NUL-terminated; `out` valid.
 */
enum RkStatus rk_corpus_filter_language(const struct RkCorpus *handle,
                                        const char *language,
                                        struct RkCorpus **out);

/**
 * Drop courses with fewer than `min_reviews` reviews.
 *
 * # Safety
 * `handle` must be live and `out` valid.
 */
enum RkStatus rk_corpus_filter_min_reviews(const struct RkCorpus *handle,
                                           size_t min_reviews,
                                           struct RkCorpus **out);

/**
 * Detect the language of `text` with the bundled character n-gram
 * profiles. Writes the code into `code_buf` and the confidence into
 * `confidence`.
 *
 * # Safety
 * `text` must be NUL-terminated; `code_buf` must hold `code_buf_len`
 * writable bytes; `confidence` must be a valid pointer.
 */
enum RkStatus rk_detect_language(const char *text,
                                 char *code_buf,
                                 size_t code_buf_len,
                                 double *confidence);

/**
 * Valence-rule compound of `text` in [-1, 1], computed on cleaned,
 * case-folded tokens with the bundled lexicon.
 *
 * # Safety
 * `text` must be NUL-terminated and `compound` a valid pointer.
 */
enum RkStatus rk_sentiment_compound(const char *text, double *compound);

/**
 * Threshold a compound value: 1 positive, 0 neutral, -1 negative
 * (neutral band inclusive at ±0.1).
 */
int rk_sentiment_label(double compound);

/**
 * Preprocess the corpus (clean, tokenize, lemmatize, stopwords, project
 * onto the chosen vocabulary) and train a collapsed-Gibbs topic model.
 * `alpha <= 0` selects the 50/K default.
 *
 * # Safety
 * `handle` must be live and `out` valid.
 */
enum RkStatus rk_model_train(const struct RkCorpus *handle,
                             enum RkVocabulary vocabulary,
                             size_t k,
                             double alpha,
                             double beta,
                             size_t iterations,
                             uint64_t seed,
                             struct RkModel **out);

/**
 * # Safety
 * `handle` must come from a model-producing call and not be freed twice.
 */
void rk_model_free(struct RkModel *handle);

/**
 * # Safety
 * `handle` must be a live model handle.
 */
size_t rk_model_topic_count(const struct RkModel *handle);

/**
 * # Safety
 * `handle` must be a live model handle.
 */
size_t rk_model_vocab_size(const struct RkModel *handle);

/**
 * Copy the top word of `topic` at `rank` (0-based, by descending
 * probability, ties lexicographic) into `buf`.
 *
 * # Safety
 * `handle` must be live and `buf` must hold `buf_len` writable bytes.
 */
enum RkStatus rk_model_top_word(const struct RkModel *handle,
                                size_t topic,
                                size_t rank,
                                char *buf,
                                size_t buf_len);

/**
 * Corpus-level topic proportions (percentages summing to 100) over the
 * model's training documents. `out` must hold `len == k` doubles.
 *
 * # Safety
 * `handle` must be live; `out` must point at `len` writable doubles.
 */
enum RkStatus rk_model_topic_proportions(const struct RkModel *handle, double *out, size_t len);

/**
 * C_umass coherence of the model's top-10 words over its training docs.
 *
 * # Safety
 * `handle` must be live and `score` a valid pointer.
 */
enum RkStatus rk_model_coherence_umass(const struct RkModel *handle, double epsilon, double *score);

/**
 * C_v coherence of the model's top-10 words over its training docs.
 *
 * # Safety
 * `handle` must be live and `score` a valid pointer.
 */
enum RkStatus rk_model_coherence_cv(const struct RkModel *handle, size_t window, double *score);

/**
 * Persist the model as a JSON container.
 *
 * # Safety
 * `handle` must be live and `path` NUL-terminated.
 */
enum RkStatus rk_model_save(const struct RkModel *handle, const char *path);

/**
 * Load a model saved by `rk_model_save`. The handle carries no training
 * documents, so the coherence calls reject it.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` valid.
 */
enum RkStatus rk_model_load(const char *path, struct RkModel **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* REVIEWKIT_H */

#ifndef EEGRET_H
#define EEGRET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define EEGRET_OK 0

#define EEGRET_ERR_FORMAT 1

#define EEGRET_ERR_INTEGRITY 2

#define EEGRET_ERR_DATA 3

#define EEGRET_ERR_CONFIG 4

#define EEGRET_ERR_PARAMETER 5

#define EEGRET_ERR_SHAPE 6

#define EEGRET_ERR_MODE 7

#define EEGRET_ERR_LOOKUP 8

#define EEGRET_ERR_IO 9

/**
 * A required pointer argument was null, or a string was not UTF-8.
 */
#define EEGRET_ERR_ARGUMENT 10

/**
 * The library panicked; this is a bug.
 */
#define EEGRET_ERR_INTERNAL 11

/**
 * Trained encoder parameters loaded from a checkpoint.
 */
typedef struct EegretEncoder EegretEncoder;

/**
 * Query × candidate score matrix.
 */
typedef struct EegretSimilarity EegretSimilarity;

/**
 * Encoder dimensions, as stored in the checkpoint.
 */
typedef struct {
  size_t channels;
  size_t timepoints;
  size_t embed;
  size_t feature_dim;
  size_t blur_levels;
} EegretDims;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the calling thread's most recent failure, or null.
 */
const char *eegret_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *eegret_version(void);

/**
 * Loads an encoder checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
int32_t eegret_encoder_load(const char *path, EegretEncoder **out);

/**
 * # Safety
 * `enc` must be null or a handle from `eegret_encoder_load`, freed once.
 */
void eegret_encoder_free(EegretEncoder *enc);

/**
 * # Safety
 * `enc` must be a live handle; `out` a valid pointer.
 */
int32_t eegret_encoder_dims(const EegretEncoder *enc, EegretDims *out);

/**
 * Eval-mode EEG embeddings. `eeg` holds `n × channels × timepoints`
 * (repetitions already averaged); `out` receives `n × embed`.
 *
 * # Safety
 * Buffers must hold the stated number of elements.
 */
int32_t eegret_embed_eeg(const EegretEncoder *enc, const float *eeg, size_t n, float *out);

/**
 * Eval-mode visual embeddings. `blur` holds `n × blur_levels × feature_dim`;
 * `evnet` is null for blur-only encoders, else `n × feature_dim`.
 *
 * # Safety
 * Buffers must hold the stated number of elements.
 */
int32_t eegret_embed_visual(const EegretEncoder *enc,
                            const float *blur,
                            const float *evnet,
                            size_t n,
                            float *out);

/**
 * Cosine similarity of `rows × dim` queries against `cols × dim` candidates.
 * Query `i`'s true candidate is `i` unless labels are set.
 *
 * # Safety
 * Buffers must hold the stated number of elements; `out` a valid pointer.
 */
int32_t eegret_similarity_cosine(const float *queries,
                                 size_t rows,
                                 const float *candidates,
                                 size_t cols,
                                 size_t dim,
                                 EegretSimilarity **out);

/**
 * Wraps a precomputed row-major `rows × cols` score matrix.
 *
 * # Safety
 * `scores` must hold `rows * cols` values; `out` a valid pointer.
 */
int32_t eegret_similarity_from_scores(const double *scores,
                                      size_t rows,
                                      size_t cols,
                                      EegretSimilarity **out);

/**
 * Sets class labels: query `i` is a hit on candidate `j` when
 * `query_labels[i] == candidate_labels[j]`.
 *
 * # Safety
 * `sim` must be a live handle; label arrays must hold `rows` / `cols` values.
 */
int32_t eegret_similarity_set_labels(EegretSimilarity *sim,
                                     const size_t *query_labels,
                                     const size_t *candidate_labels);

/**
 * # Safety
 * `sim` must be null or a live handle, freed once.
 */
void eegret_similarity_free(EegretSimilarity *sim);

/**
 * Fraction of queries whose true candidate ranks within the top `k`
 * (ties broken towards the lower index).
 *
 * # Safety
 * `sim` must be a live handle; `out` a valid pointer.
 */
int32_t eegret_top_k_accuracy(const EegretSimilarity *sim, size_t k, double *out);

/**
 * Maximum-score one-to-one assignment of a square matrix. `permutation`
 * receives `rows` candidate indices; `total` (nullable) the summed score.
 *
 * # Safety
 * `sim` must be a live handle; `permutation` must hold `rows` values.
 */
int32_t eegret_hungarian_assign(const EegretSimilarity *sim, size_t *permutation, double *total);

/**
 * Top-k accuracy under `k` successive disjoint one-to-one assignments.
 *
 * # Safety
 * `sim` must be a live handle; `out` a valid pointer.
 */
int32_t eegret_hungarian_top_k(const EegretSimilarity *sim, size_t k, double *out);

/**
 * Mean SSIM of two equally sized RGB images (luminance, Gaussian 11/1.5).
 *
 * # Safety
 * Both images must hold `height * width * 3` values; `out` a valid pointer.
 */
int32_t eegret_ssim(const double *a, const double *b, size_t height, size_t width, double *out);

/**
 * Pixel correlation after resizing both images to 256 × 256.
 *
 * # Safety
 * Each image must hold `h * w * 3` values; `out` a valid pointer.
 */
int32_t eegret_pixcorr(const double *a,
                       size_t a_height,
                       size_t a_width,
                       const double *b,
                       size_t b_height,
                       size_t b_width,
                       double *out);

/**
 * Two-way identification over aligned `n × dim` feature rows.
 *
 * # Safety
 * Both matrices must hold `n * dim` values; `out` a valid pointer.
 */
int32_t eegret_two_way_identification(const double *gen,
                                      const double *gt,
                                      size_t n,
                                      size_t dim,
                                      double *out);

/**
 * Mean `1 − r` between aligned `n × dim` feature rows.
 *
 * # Safety
 * Both matrices must hold `n * dim` values; `out` a valid pointer.
 */
int32_t eegret_correlation_distance(const double *gen,
                                    const double *gt,
                                    size_t n,
                                    size_t dim,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EEGRET_H */

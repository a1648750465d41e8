#ifndef LEAFDX_H
#define LEAFDX_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum LeafdxStatus {
  LEAFDX_STATUS_OK = 0,
  LEAFDX_STATUS_NULL_POINTER = 1,
  LEAFDX_STATUS_INVALID_ARGUMENT = 2,
  LEAFDX_STATUS_IO = 3,
  LEAFDX_STATUS_PARSE = 4,
  LEAFDX_STATUS_DIMENSION_MISMATCH = 5,
  /**
   * The quantity is undefined for the input (e.g. AP with no GT and no predictions).
   */
  LEAFDX_STATUS_UNDEFINED = 6,
  LEAFDX_STATUS_PANIC = 7,
} LeafdxStatus;

/**
 * Hashed bag-of-words embedder.
 */
typedef struct LeafdxEmbedder LeafdxEmbedder;

/**
 * In-memory vector store.
 */
typedef struct LeafdxStore LeafdxStore;

/**
 * Axis-aligned box in pixel corners.
 */
typedef struct LeafdxBox {
  double x1;
  double y1;
  double x2;
  double y2;
} LeafdxBox;

/**
 * One ranked prediction for AP computation.
 */
typedef struct LeafdxMatch {
  double confidence;
  bool is_tp;
} LeafdxMatch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *leafdx_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library that was not freed yet.
 */
void leafdx_string_free(char *s);

/**
 * Intersection over union; 0 for disjoint or degenerate boxes.
 */
double leafdx_iou(struct LeafdxBox a, struct LeafdxBox b);

/**
 * Interpolated AP of predictions (any order) against `n_gt` ground-truth boxes.
 *
 * # Safety
 * `preds` must point to `n` readable elements (it may be NULL when `n` is 0);
 * `out` must be writable.
 */
enum LeafdxStatus leafdx_average_precision(const struct LeafdxMatch *preds,
                                           size_t n,
                                           size_t n_gt,
                                           double *out);

/**
 * Evaluates YOLO prediction files against ground-truth files and writes the
 * report as JSON to `*out_json`.
 *
 * # Safety
 * String arguments must be NUL-terminated; `sizes_csv` may be NULL (every image
 * then counts as the same size). `out_json` must be writable.
 */
enum LeafdxStatus leafdx_evaluate_dataset(const char *pred_dir,
                                          const char *gt_dir,
                                          const char *classes_file,
                                          const char *sizes_csv,
                                          double conf_threshold,
                                          double iou_threshold,
                                          char **out_json);

/**
 * Splits `text` into overlapping chunks; writes a JSON array of
 * `{"text","start","end"}` (character offsets) to `*out_json`.
 *
 * # Safety
 * `text` must be NUL-terminated; `out_json` must be writable.
 */
enum LeafdxStatus leafdx_split_text(const char *text,
                                    size_t chunk_size,
                                    size_t overlap,
                                    char **out_json);

/**
 * New hashed embedder of dimension `dim`, or NULL if `dim` is 0.
 */
struct LeafdxEmbedder *leafdx_embedder_new(size_t dim);

/**
 * # Safety
 * `e` must be NULL or a live handle from [`leafdx_embedder_new`].
 */
void leafdx_embedder_free(struct LeafdxEmbedder *e);

/**
 * # Safety
 * `e` must be a live embedder handle.
 */
size_t leafdx_embedder_dim(const struct LeafdxEmbedder *e);

/**
 * Embeds `text` into `out`, which must hold exactly the embedder's dimension.
 *
 * # Safety
 * `e` must be a live handle, `text` NUL-terminated, `out` writable for `out_len` doubles.
 */
enum LeafdxStatus leafdx_embedder_embed(const struct LeafdxEmbedder *e,
                                        const char *text,
                                        double *out,
                                        size_t out_len);

/**
 * New empty store, or NULL if `dim` is 0.
 */
struct LeafdxStore *leafdx_store_new(size_t dim);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable. On success `*out`
 * receives a handle to free with [`leafdx_store_free`].
 */
enum LeafdxStatus leafdx_store_load(const char *path, struct LeafdxStore **out);

/**
 * # Safety
 * `s` must be a live store handle and `path` NUL-terminated.
 */
enum LeafdxStatus leafdx_store_persist(const struct LeafdxStore *s, const char *path);

/**
 * # Safety
 * `s` must be NULL or a live store handle.
 */
size_t leafdx_store_len(const struct LeafdxStore *s);

/**
 * # Safety
 * `s` must be NULL or a live handle from [`leafdx_store_new`] or [`leafdx_store_load`].
 */
void leafdx_store_free(struct LeafdxStore *s);

/**
 * Loads, chunks and embeds every `.md`/`.txt` file under `dir` into the store.
 *
 * # Safety
 * Handles must be live, `dir` NUL-terminated; `chunks_added` may be NULL.
 */
enum LeafdxStatus leafdx_store_ingest_dir(struct LeafdxStore *s,
                                          const struct LeafdxEmbedder *e,
                                          const char *dir,
                                          size_t chunk_size,
                                          size_t overlap,
                                          size_t *chunks_added);

/**
 * Top-k search for `query`; writes `[{"chunk":{..},"score":..}, ..]` to `*out_json`.
 *
 * # Safety
 * Handles must be live, `query` NUL-terminated, `out_json` writable.
 */
enum LeafdxStatus leafdx_store_search(const struct LeafdxStore *s,
                                      const struct LeafdxEmbedder *e,
                                      const char *query,
                                      size_t k,
                                      char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEAFDX_H */

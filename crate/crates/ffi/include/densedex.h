#ifndef DENSEDEX_H
#define DENSEDEX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DdxEncoding {
  DDX_ENCODING_FAKE_WORDS = 0,
  DDX_ENCODING_LEXICAL_LSH = 1,
} DdxEncoding;

/**
 * Status codes returned by every fallible function.
 */
typedef enum DdxStatus {
  DDX_STATUS_OK = 0,
  DDX_STATUS_NULL_ARGUMENT = 1,
  DDX_STATUS_INVALID_ARGUMENT = 2,
  DDX_STATUS_IO = 3,
  DDX_STATUS_PARSE = 4,
  DDX_STATUS_CORRUPT_INDEX = 5,
  DDX_STATUS_DIMENSION_MISMATCH = 6,
  DDX_STATUS_INVALID_CONFIG = 7,
  DDX_STATUS_DUPLICATE_DOC_ID = 8,
  DDX_STATUS_EMPTY_CORPUS = 9,
  DDX_STATUS_OUT_OF_RANGE = 10,
  DDX_STATUS_PANIC = 11,
  DDX_STATUS_OTHER = 12,
} DdxStatus;

/**
 * Opaque loaded index.
 */
typedef struct DdxIndex DdxIndex;

/**
 * Opaque ranked result list.
 */
typedef struct DdxResults DdxResults;

/**
 * Encoder selection. `q` applies to fake words; `d`, `n` and `b` to
 * lexical LSH.
 */
typedef struct DdxEncoderConfig {
  enum DdxEncoding encoding;
  uint32_t q;
  uint32_t d;
  uint32_t n;
  uint32_t b;
} DdxEncoderConfig;

typedef struct DdxIndexStats {
  uint64_t num_docs;
  uint32_t dimension;
  uint64_t distinct_terms;
  uint64_t total_postings;
  uint64_t total_tokens;
  /**
   * 0 when the index has not been read from disk.
   */
  uint64_t bytes_on_disk;
} DdxIndexStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null.
 */
const char *ddx_last_error(void);

/**
 * Returns a default encoder configuration for `encoding`.
 */
struct DdxEncoderConfig ddx_encoder_default(enum DdxEncoding encoding);

/**
 * Builds an index from a JSON-lines vector file and writes it to `out_dir`.
 *
 * # Safety
 * `vectors_path` and `out_dir` must be null or valid NUL-terminated strings;
 * `config` must be null or point to a valid `DdxEncoderConfig`.
 */
enum DdxStatus ddx_index_build(const char *vectors_path,
                               const struct DdxEncoderConfig *config,
                               const char *out_dir);

/**
 * Loads an index directory. On success `*out` receives a handle to free
 * with [`ddx_index_free`].
 *
 * # Safety
 * `dir` must be null or a valid NUL-terminated string; `out` must be null
 * or valid for writing one pointer.
 */
enum DdxStatus ddx_index_open(const char *dir, struct DdxIndex **out);

/**
 * # Safety
 * `index` must be null or a handle from [`ddx_index_open`] not yet freed.
 */
void ddx_index_free(struct DdxIndex *index);

/**
 * # Safety
 * `index` must be a live handle and `out` valid for writing.
 */
enum DdxStatus ddx_index_stats(const struct DdxIndex *index, struct DdxIndexStats *out);

/**
 * Top-`k` search for one query vector of `len` components. The query is
 * encoded with the index's own encoder. On success `*out` receives a result
 * handle to free with [`ddx_results_free`].
 *
 * # Safety
 * `index` must be a live handle, `values` must point to `len` doubles, and
 * `out` must be valid for writing one pointer.
 */
enum DdxStatus ddx_index_search(const struct DdxIndex *index,
                                const double *values,
                                size_t len,
                                size_t k,
                                struct DdxResults **out);

/**
 * # Safety
 * `results` must be null or a live result handle.
 */
size_t ddx_results_len(const struct DdxResults *results);

/**
 * Document id at rank `i` (0-based), or null when out of range.
 *
 * # Safety
 * `results` must be null or a live result handle.
 */
const char *ddx_results_id(const struct DdxResults *results, size_t i);

/**
 * Score at rank `i` (0-based), or NaN when out of range.
 *
 * # Safety
 * `results` must be null or a live result handle.
 */
double ddx_results_score(const struct DdxResults *results, size_t i);

/**
 * # Safety
 * `results` must be null or a handle from [`ddx_index_search`] not yet freed.
 */
void ddx_results_free(struct DdxResults *results);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DENSEDEX_H */

#ifndef CHEMTEXT_H
#define CHEMTEXT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum CtkStatus {
  CTK_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  CTK_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not UTF-8.
   */
  CTK_STATUS_INVALID_UTF8 = 2,
  /**
   * SMILES, JSON, template or vocabulary text was rejected.
   */
  CTK_STATUS_INVALID_INPUT = 3,
  /**
   * A data file no longer matches its index.
   */
  CTK_STATUS_DIGEST_MISMATCH = 4,
  CTK_STATUS_IO = 5,
  /**
   * Scoring could not run on the given inputs.
   */
  CTK_STATUS_METRIC = 6,
  /**
   * An index was past the end.
   */
  CTK_STATUS_OUT_OF_RANGE = 7,
  /**
   * Internal failure; the call had no effect.
   */
  CTK_STATUS_PANIC = 8,
} CtkStatus;

typedef struct CtkDataset CtkDataset;

typedef struct CtkMixture CtkMixture;

typedef struct CtkTemplateSet CtkTemplateSet;

typedef struct CtkVocabulary CtkVocabulary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Toolkit version, static storage.
 */
const char *ctk_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *ctk_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void ctk_string_free(char *s);

/**
 * # Safety
 * `ids` must be null or an array returned by this library with its length.
 */
void ctk_ids_free(uint32_t *ids, size_t len);

/**
 * Canonical SMILES. Invalid input fails with `kind@position: message`.
 *
 * # Safety
 * `smiles` must be a NUL-terminated string; `out` must be writable.
 */
enum CtkStatus ctk_canonical_smiles(const char *smiles, bool ignore_stereo, char **out);

/**
 * Writes whether both strings denote the same molecule. When either is
 * invalid, writes false and fails with its diagnostic.
 *
 * # Safety
 * `a` and `b` must be NUL-terminated strings; `out` must be writable.
 */
enum CtkStatus ctk_canonical_equal(const char *a, const char *b, bool ignore_stereo, bool *out);

/**
 * A seeded random depth-first rendering of the molecule.
 *
 * # Safety
 * `smiles` must be a NUL-terminated string; `out` must be writable.
 */
enum CtkStatus ctk_randomize_smiles(const char *smiles, uint64_t seed, char **out);

/**
 * Space-joined SMILES tokens, `<sm_...>` wrapped when `wrap` is set.
 *
 * # Safety
 * `smiles` must be a NUL-terminated string; `out` must be writable.
 */
enum CtkStatus ctk_tokenize_smiles(const char *smiles, bool wrap, char **out);

/**
 * Vocabulary from one token per line (line number = id). With
 * `add_specials` the special tokens are prepended.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum CtkStatus ctk_vocabulary_new(const char *text, bool add_specials, struct CtkVocabulary **out);

/**
 * # Safety
 * `v` must be null or a live vocabulary handle.
 */
void ctk_vocabulary_free(struct CtkVocabulary *v);

/**
 * # Safety
 * `v` must be a live vocabulary handle; `out` must be writable.
 */
enum CtkStatus ctk_vocabulary_len(const struct CtkVocabulary *v, size_t *out);

/**
 * The vocabulary file text: one token per line.
 *
 * # Safety
 * `v` must be a live vocabulary handle; `out` must be writable.
 */
enum CtkStatus ctk_vocabulary_write(const struct CtkVocabulary *v, char **out);

/**
 * Extends `base` with wrapped chemical tokens from a SMILES-per-line
 * corpus. Writes the new vocabulary, the plan file text and the number of
 * unlexable corpus lines.
 *
 * # Safety
 * `base` must be a live handle; `corpus` a NUL-terminated string; the
 * out pointers must be writable.
 */
enum CtkStatus ctk_vocabulary_extend(const struct CtkVocabulary *base,
                                     const char *corpus,
                                     struct CtkVocabulary **out_vocab,
                                     char **out_plan,
                                     size_t *out_skipped);

/**
 * Token ids for mixed text: detected SMILES become chemical tokens, prose
 * goes through the whitespace tokenizer. With `fail_unknown` an
 * out-of-vocabulary chemical token fails instead of mapping to `<unk>`.
 * Release the ids with [`ctk_ids_free`].
 *
 * # Safety
 * `v` must be a live handle; `text` a NUL-terminated string; the out
 * pointers must be writable.
 */
enum CtkStatus ctk_encode_text(const struct CtkVocabulary *v,
                               const char *text,
                               bool fail_unknown,
                               uint32_t **out_ids,
                               size_t *out_len);

/**
 * # Safety
 * `out` must be writable.
 */
enum CtkStatus ctk_templates_bundled(struct CtkTemplateSet **out);

/**
 * Templates from template-file text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum CtkStatus ctk_templates_parse(const char *text, struct CtkTemplateSet **out);

/**
 * # Safety
 * `t` must be null or a live template-set handle.
 */
void ctk_templates_free(struct CtkTemplateSet *t);

/**
 * Renders one instance record (JSON) with a seeded template choice;
 * writes the formatted pair as JSON.
 *
 * # Safety
 * `t` must be a live handle; `instance_json` a NUL-terminated string;
 * `out` must be writable.
 */
enum CtkStatus ctk_format_instance(const struct CtkTemplateSet *t,
                                   const char *instance_json,
                                   uint64_t seed,
                                   char **out);

/**
 * Scores predictions against gold records, both JSONL text, as the
 * `score` command does. `options_json` (nullable) may set `k`, `match`
 * (`"exact"` or `"canonical"`), `template`, `labels` and `strict`;
 * `templates` (nullable) defaults to the bundled set. Writes one report
 * JSON object per line.
 *
 * # Safety
 * String arguments must be NUL-terminated or null where allowed; `out`
 * must be writable.
 */
enum CtkStatus ctk_score(const char *task,
                         const char *gold_jsonl,
                         const char *pred_jsonl,
                         const char *options_json,
                         const struct CtkTemplateSet *templates,
                         char **out);

/**
 * Generation suite over SMILES-per-line texts. `train` and `test` may be
 * null; without a test set the distributional fields are null. An empty
 * non-null test set fails. `config_json` (nullable) may set `k` and `p`.
 * Writes the stats as JSON.
 *
 * # Safety
 * String arguments must be NUL-terminated or null where allowed; `out`
 * must be writable.
 */
enum CtkStatus ctk_generation_suite(const char *gen,
                                    const char *train,
                                    const char *test,
                                    const char *config_json,
                                    char **out);

/**
 * Writes the `.nidx` sidecar for a newline-delimited file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_count` must be writable.
 */
enum CtkStatus ctk_dataset_build_index(const char *path, uint64_t *out_count);

/**
 * Opens a file with its verified index.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CtkStatus ctk_dataset_open(const char *path, struct CtkDataset **out);

/**
 * # Safety
 * `d` must be null or a live dataset handle.
 */
void ctk_dataset_free(struct CtkDataset *d);

/**
 * # Safety
 * `d` must be a live handle; `out` must be writable.
 */
enum CtkStatus ctk_dataset_len(const struct CtkDataset *d, uint64_t *out);

/**
 * Borrows record `i` (without its newline). The bytes stay valid until the
 * handle is freed.
 *
 * # Safety
 * `d` must be a live handle; the out pointers must be writable.
 */
enum CtkStatus ctk_dataset_get(const struct CtkDataset *d,
                               uint64_t i,
                               const uint8_t **out_ptr,
                               size_t *out_len);

/**
 * Opens a mixture spec (JSON file); every component index is verified.
 *
 * # Safety
 * `spec_path` must be a NUL-terminated string; `out` must be writable.
 */
enum CtkStatus ctk_mixture_open(const char *spec_path, struct CtkMixture **out);

/**
 * # Safety
 * `m` must be null or a live mixture handle.
 */
void ctk_mixture_free(struct CtkMixture *m);

/**
 * The first `n` seeded draws, written to caller arrays of length `n`.
 *
 * # Safety
 * `m` must be a live handle; `components` and `records` must each hold
 * `n` elements.
 */
enum CtkStatus ctk_mixture_sample(const struct CtkMixture *m,
                                  size_t n,
                                  size_t *components,
                                  size_t *records);

/**
 * Borrows record `record` of component `component`; valid until the
 * handle is freed.
 *
 * # Safety
 * `m` must be a live handle; the out pointers must be writable.
 */
enum CtkStatus ctk_mixture_record(const struct CtkMixture *m,
                                  size_t component,
                                  size_t record,
                                  const uint8_t **out_ptr,
                                  size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHEMTEXT_H */

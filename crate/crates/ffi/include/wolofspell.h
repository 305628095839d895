#ifndef WOLOFSPELL_H
#define WOLOFSPELL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  WS_STATUS_OK = 0,
  WS_STATUS_NULL_ARGUMENT = 1,
  WS_STATUS_INVALID_UTF8 = 2,
  WS_STATUS_IO = 3,
  WS_STATUS_PARSE = 4,
  WS_STATUS_INVALID_ARGUMENT = 5,
  WS_STATUS_ALIGNMENT = 6,
  WS_STATUS_PANIC = 7,
} WsStatus;

/**
 * Rules, their inversion and a language model, ready to correct text.
 */
typedef struct WsCorrector WsCorrector;

/**
 * Character n-gram language model.
 */
typedef struct WsLanguageModel WsLanguageModel;

/**
 * Compiled rewrite rules.
 */
typedef struct WsRuleSet WsRuleSet;

typedef struct {
  size_t beam_width;
  double lm_weight;
  /**
   * 0 keeps every candidate.
   */
  size_t max_candidates_per_span;
  /**
   * Channel probability that a span needs no change, in (0, 1).
   */
  double identity_prob;
} WsDecoderConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ws_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *ws_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void ws_string_free(char *s);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
WsStatus ws_ruleset_builtin(WsRuleSet **out);

/**
 * Loads a built-in rule set by name, or a rule file by path.
 *
 * # Safety
 * `name_or_path` must be a NUL-terminated string; `out` a valid pointer.
 */
WsStatus ws_ruleset_load(const char *name_or_path, WsRuleSet **out);

/**
 * Compiles rules from the text of a rule file.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` a valid pointer.
 */
WsStatus ws_ruleset_parse(const char *source, WsRuleSet **out);

/**
 * Number of rules in the set.
 *
 * # Safety
 * `rules` must be NULL or a live handle.
 */
size_t ws_ruleset_len(const WsRuleSet *rules);

/**
 * Normalizes `sentence` and rewrites it into conventional spelling.
 *
 * # Safety
 * `rules` must be a live handle, `sentence` a NUL-terminated string and
 * `out` a valid pointer; free `*out` with [`ws_string_free`].
 */
WsStatus ws_ruleset_apply(const WsRuleSet *rules, const char *sentence, char **out);

/**
 * # Safety
 * `rules` must be NULL or a handle not yet freed.
 */
void ws_ruleset_free(WsRuleSet *rules);

/**
 * Trains an additive-smoothing character model of the given order.
 *
 * # Safety
 * `sentences` must point to `n` NUL-terminated strings (it may be NULL
 * when `n` is 0); `out` must be a valid pointer.
 */
WsStatus ws_lm_train(const char *const *sentences,
                     size_t n,
                     size_t order,
                     double k,
                     WsLanguageModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
WsStatus ws_lm_load(const char *path, WsLanguageModel **out);

/**
 * # Safety
 * `lm` must be a live handle and `path` a NUL-terminated string.
 */
WsStatus ws_lm_save(const WsLanguageModel *lm, const char *path);

/**
 * Natural-log probability of the normalized sentence, end symbol included.
 *
 * # Safety
 * `lm` must be a live handle, `sentence` a NUL-terminated string and
 * `out` a valid pointer.
 */
WsStatus ws_lm_score(const WsLanguageModel *lm, const char *sentence, double *out);

/**
 * # Safety
 * `lm` must be NULL or a handle not yet freed.
 */
void ws_lm_free(WsLanguageModel *lm);

/**
 * The library's default decoder settings.
 */
WsDecoderConfig ws_decoder_config_default(void);

/**
 * Builds a corrector from copies of `rules` and `lm`; both handles stay
 * owned by the caller. `config` may be NULL for the defaults.
 *
 * # Safety
 * `rules` and `lm` must be live handles, `config` NULL or valid, and
 * `out` a valid pointer.
 */
WsStatus ws_corrector_new(const WsRuleSet *rules,
                          const WsLanguageModel *lm,
                          const WsDecoderConfig *config,
                          WsCorrector **out);

/**
 * Corrects one conventional-spelling sentence.
 *
 * # Safety
 * `corrector` must be a live handle, `sentence` a NUL-terminated string
 * and `out` a valid pointer; free `*out` with [`ws_string_free`].
 */
WsStatus ws_corrector_correct(const WsCorrector *corrector, const char *sentence, char **out);

/**
 * # Safety
 * `corrector` must be NULL or a handle not yet freed.
 */
void ws_corrector_free(WsCorrector *corrector);

/**
 * Sentence-level accuracy in percent after normalization.
 *
 * # Safety
 * `predictions` and `references` must point to `n_predictions` and
 * `n_references` NUL-terminated strings; `out` must be a valid pointer.
 */
WsStatus ws_sentence_accuracy(const char *const *predictions,
                              size_t n_predictions,
                              const char *const *references,
                              size_t n_references,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WOLOFSPELL_H */

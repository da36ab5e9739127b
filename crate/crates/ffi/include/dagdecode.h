#ifndef DAGDECODE_H
#define DAGDECODE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible function.
 */
typedef enum DagStatus {
  DAG_STATUS_OK = 0,
  DAG_STATUS_NULL_POINTER = 1,
  DAG_STATUS_INVALID_ARGUMENT = 2,
  DAG_STATUS_PARSE = 3,
  DAG_STATUS_SHAPE = 4,
  DAG_STATUS_VALIDATION = 5,
  DAG_STATUS_VOCAB = 6,
  DAG_STATUS_INFEASIBLE = 7,
  DAG_STATUS_DEAD_END = 8,
  DAG_STATUS_PANIC = 9,
} DagStatus;

typedef enum DagStrategy {
  DAG_STRATEGY_GREEDY = 0,
  DAG_STRATEGY_LOOKAHEAD = 1,
  DAG_STRATEGY_VITERBI = 2,
  DAG_STRATEGY_JOINT_VITERBI = 3,
} DagStrategy;

/**
 * Opaque decoded hypothesis.
 */
typedef struct DagHypothesis DagHypothesis;

/**
 * Opaque lattice instance.
 */
typedef struct DagInstance DagInstance;

/**
 * Log-probabilities of a (path, tokens) pair.
 */
typedef struct DagScores {
  double path_logprob;
  double emission_logprob;
  double joint_logprob;
} DagScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library from the same thread.
 */
const char *dag_last_error_message(void);

/**
 * Parses a JSON instance document (NUL-terminated UTF-8).
 *
 * # Safety
 * `json` must be a valid C string; `out` must be writable.
 */
enum DagStatus dag_instance_from_json(const char *json, bool validate, struct DagInstance **out);

/**
 * Builds an instance from row-major tables: `length * length` transition
 * log-probabilities (source-major) and `length * vocab_size` emission
 * log-probabilities.
 *
 * # Safety
 * The table pointers must reference arrays of the stated sizes.
 */
enum DagStatus dag_instance_from_tables(size_t length,
                                        size_t vocab_size,
                                        const double *log_transitions,
                                        const double *log_emissions,
                                        bool validate,
                                        struct DagInstance **out);

/**
 * Generates a seeded synthetic instance with Dirichlet rows.
 *
 * # Safety
 * `out` must be writable.
 */
enum DagStatus dag_instance_generate(size_t length,
                                     size_t vocab_size,
                                     uint64_t seed,
                                     double transition_concentration,
                                     double emission_concentration,
                                     double sparsity,
                                     struct DagInstance **out);

/**
 * # Safety
 * `instance` must come from this library and not be freed twice. NULL is ignored.
 */
void dag_instance_free(struct DagInstance *instance);

/**
 * Lattice length, or 0 for NULL.
 *
 * # Safety
 * `instance` must be NULL or a live handle.
 */
size_t dag_instance_length(const struct DagInstance *instance);

/**
 * Vocabulary size, or 0 for NULL.
 *
 * # Safety
 * `instance` must be NULL or a live handle.
 */
size_t dag_instance_vocab_size(const struct DagInstance *instance);

/**
 * Number of invariant violations (0 for a valid instance).
 *
 * # Safety
 * `instance` must be a live handle; `out` must be writable.
 */
enum DagStatus dag_instance_violation_count(const struct DagInstance *instance, size_t *out);

/**
 * Decodes with the given strategy; `beta` is the length penalty for the
 * Viterbi family.
 *
 * # Safety
 * `instance` must be a live handle; `out` must be writable.
 */
enum DagStatus dag_decode(const struct DagInstance *instance,
                          enum DagStrategy strategy,
                          double beta,
                          struct DagHypothesis **out);

/**
 * # Safety
 * `hypothesis` must come from this library and not be freed twice. NULL is ignored.
 */
void dag_hypothesis_free(struct DagHypothesis *hypothesis);

/**
 * Number of positions (and tokens), or 0 for NULL.
 *
 * # Safety
 * `hypothesis` must be NULL or a live handle.
 */
size_t dag_hypothesis_length(const struct DagHypothesis *hypothesis);

/**
 * Copies up to `cap` 1-based path positions into `buf` and returns the
 * full path length. Pass `buf = NULL` to query the length.
 *
 * # Safety
 * `hypothesis` must be a live handle; `buf` must hold `cap` elements.
 */
size_t dag_hypothesis_path(const struct DagHypothesis *hypothesis, size_t *buf, size_t cap);

/**
 * Copies up to `cap` token ids into `buf` and returns the token count.
 *
 * # Safety
 * `hypothesis` must be a live handle; `buf` must hold `cap` elements.
 */
size_t dag_hypothesis_tokens(const struct DagHypothesis *hypothesis, size_t *buf, size_t cap);

/**
 * # Safety
 * `hypothesis` must be a live handle; `out` must be writable.
 */
enum DagStatus dag_hypothesis_scores(const struct DagHypothesis *hypothesis, struct DagScores *out);

/**
 * Scores `tokens` along `path` (both of length `len`).
 *
 * # Safety
 * `path` and `tokens` must reference `len` elements each.
 */
enum DagStatus dag_score(const struct DagInstance *instance,
                         const size_t *path,
                         const size_t *tokens,
                         size_t len,
                         struct DagScores *out);

/**
 * `log P(Y|X)` of `tokens`, summed over every path of matching length.
 *
 * # Safety
 * `tokens` must reference `len` elements; `out` must be writable.
 */
enum DagStatus dag_marginal_log_prob(const struct DagInstance *instance,
                                     const size_t *tokens,
                                     size_t len,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DAGDECODE_H */

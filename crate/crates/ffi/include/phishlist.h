#ifndef PHISHLIST_H
#define PHISHLIST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_INVALID_UTF8 = 2,
  PL_STATUS_INVALID_JSON = 3,
  /**
   * A transaction failed validation; the message holds the reason code.
   */
  PL_STATUS_REJECTED = 4,
  PL_STATUS_INVALID_PARAMS = 5,
  PL_STATUS_NOT_FOUND = 6,
  PL_STATUS_IO = 7,
  PL_STATUS_PANIC = 8,
} PlStatus;

/**
 * Opaque ledger handle: committed state plus its block chain.
 */
typedef struct PlLedger PlLedger;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next phishlist call on the same thread. Never NULL.
 */
const char *pl_last_error_message(void);

/**
 * # Safety
 * `s` must come from a phishlist `out` string and not be freed yet. NULL is a no-op.
 */
void pl_string_free(char *s);

/**
 * New ledger at genesis with default derivation parameters.
 */
struct PlLedger *pl_ledger_new(void);

/**
 * # Safety
 * `ledger` must come from `pl_ledger_new` or `pl_ledger_open` and not be freed yet.
 */
void pl_ledger_free(struct PlLedger *ledger);

/**
 * Replays a `chain.jsonl` block log into a new ledger.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum PlStatus pl_ledger_open(const char *path, struct PlLedger **out);

/**
 * Commits a block holding the given transactions (a JSON array, or a
 * single transaction object) on top of the ledger. On `Rejected` the
 * error message is `<index>:<ReasonCode>` and the ledger is unchanged.
 * Writes the new block hash (hex) to `out_hash` when it is non-NULL.
 *
 * # Safety
 * `ledger` is a live handle, `txs_json` a NUL-terminated string, and
 * `out_hash` NULL or writable.
 */
enum PlStatus pl_ledger_commit(struct PlLedger *ledger, const char *txs_json, char **out_hash);

/**
 * Validates one transaction against the current state without applying it.
 * Returns `Rejected` with the reason code as the error message.
 *
 * # Safety
 * `ledger` is a live handle and `tx_json` a NUL-terminated string.
 */
enum PlStatus pl_ledger_validate(const struct PlLedger *ledger, const char *tx_json);

/**
 * Height of the ledger tip (0 at genesis).
 *
 * # Safety
 * `ledger` is a live handle or NULL (returns 0).
 */
uint64_t pl_ledger_height(const struct PlLedger *ledger);

/**
 * SHA-256 state digest, lowercase hex.
 *
 * # Safety
 * `ledger` is a live handle; `out` is writable.
 */
enum PlStatus pl_ledger_state_digest(const struct PlLedger *ledger, char **out);

/**
 * URL detail view as JSON, or `NotFound`.
 *
 * # Safety
 * `ledger` is a live handle, `url_id` a NUL-terminated string, `out` writable.
 */
enum PlStatus pl_ledger_lookup(const struct PlLedger *ledger, const char *url_id, char **out);

/**
 * Blacklist as a JSON array, highest score first.
 *
 * # Safety
 * `ledger` is a live handle; `out` is writable.
 */
enum PlStatus pl_ledger_blacklist(const struct PlLedger *ledger, char **out);

/**
 * url_id (hex SHA-256 of the normalized URL), or `InvalidParams` for a
 * malformed URL.
 *
 * # Safety
 * `url` is a NUL-terminated string; `out` is writable.
 */
enum PlStatus pl_url_id(const char *url, char **out);

/**
 * `2 * floor((n - 1) / 3) + 1`, or 0 when `n` is 0.
 */
size_t pl_quorum_size(size_t n);

/**
 * PageRank over `{"nodes": [...], "edges": [{"from","to","weight"}]}`.
 * Writes `{"ranks": {...}, "iterations_used": n, "converged": b, ...}`.
 *
 * # Safety
 * `graph_json` is a NUL-terminated string; `out` is writable.
 */
enum PlStatus pl_pagerank(const char *graph_json,
                          double damping,
                          double tol,
                          uint32_t max_iter,
                          char **out);

/**
 * Phish score of `votes_json` (`[["verifier", "Phishing"], ...]`) under
 * `ranks_json` (`{"verifier": rank}`). `*has_score` is false while there
 * are fewer than three votes.
 *
 * # Safety
 * Strings are NUL-terminated; `score` and `has_score` are writable.
 */
enum PlStatus pl_phish_score(const char *ranks_json,
                             const char *votes_json,
                             double *score,
                             bool *has_score);

/**
 * Runs the truth-discovery benchmark; `spec_json` may be `{}` for defaults.
 *
 * # Safety
 * `spec_json` is a NUL-terminated string; `out` is writable.
 */
enum PlStatus pl_run_bench(const char *spec_json, char **out);

/**
 * Runs a consensus scenario; writes the simulation report as JSON.
 *
 * # Safety
 * `scenario_json` is a NUL-terminated string; `out` is writable.
 */
enum PlStatus pl_run_simulation(const char *scenario_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHISHLIST_H */

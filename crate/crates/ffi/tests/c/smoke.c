#include <stdio.h>
#include <string.h>
#include "phishlist.h"

int main(void) {
    PlLedger *ledger = pl_ledger_new();
    const char *tx = "{\"sender\":\"alice\",\"nonce\":1,\"kind\":\"RegisterUser\",\"payload\":{\"display_name\":\"Alice\"}}";
    char *hash = NULL;
    if (pl_ledger_commit(ledger, tx, &hash) != PL_STATUS_OK) {
        fprintf(stderr, "commit failed: %s\n", pl_last_error_message());
        return 1;
    }
    char *digest = NULL;
    if (pl_ledger_state_digest(ledger, &digest) != PL_STATUS_OK) return 1;
    if (pl_ledger_commit(ledger, tx, NULL) != PL_STATUS_REJECTED) return 1;
    printf("%llu %s %s %s %zu\n", (unsigned long long)pl_ledger_height(ledger), hash, digest,
           pl_last_error_message(), pl_quorum_size(7));
    pl_string_free(hash);
    pl_string_free(digest);
    pl_ledger_free(ledger);
    return 0;
}

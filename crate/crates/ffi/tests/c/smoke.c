#include <stdio.h>
#include "osclab.h"

#define CHECK(expr, want)                                                   \
    do {                                                                    \
        OsclabStatus s_ = (expr);                                           \
        if (s_ != (want)) {                                                 \
            char msg[256];                                                  \
            osclab_last_error_message(msg, sizeof msg);                     \
            fprintf(stderr, "%s: status %d (%s)\n", #expr, (int)s_, msg);   \
            return 1;                                                       \
        }                                                                   \
    } while (0)

int main(void) {
    OsclabInstance *inst = NULL, *bad = NULL;
    OsclabTiling *tiling = NULL;
    size_t dim = 0, n = 0;
    int64_t lo = 0, hi = 0;

    CHECK(osclab_instance_builtin("paper-even-d2", &inst), OSCLAB_STATUS_OK);
    CHECK(osclab_instance_dim(inst, &dim), OSCLAB_STATUS_OK);
    if (dim != 4) return 2;
    CHECK(osclab_check_lambda(inst, 0.5), OSCLAB_STATUS_CONSTRAINT_VIOLATION);
    CHECK(osclab_instance_builtin("nope", &bad), OSCLAB_STATUS_INVALID_INPUT);
    if (bad != NULL) return 3;

    CHECK(osclab_tiling_new(100.0, 1000.0, &tiling), OSCLAB_STATUS_OK);
    CHECK(osclab_tiling_len(tiling, &n), OSCLAB_STATUS_OK);
    CHECK(osclab_tiling_locate(tiling, 0.5, &lo, &hi), OSCLAB_STATUS_OK);
    if (!(lo <= 0 && hi >= 1)) return 4;
    CHECK(osclab_tiling_len(NULL, &n), OSCLAB_STATUS_NULL_POINTER);

    osclab_tiling_free(tiling);
    osclab_instance_free(inst);
    printf("ok %zu cells\n", n);
    return 0;
}

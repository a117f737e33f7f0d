#include <math.h>
#include <stdio.h>
#include "smoothext.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            const char *m = sx_last_error_message();                  \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,    \
                    m ? m : "no message");                            \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    double lo[] = {0.0, 2.0};
    double hi[] = {1.0, 3.0};
    SxEvaluator *h = NULL, *g = NULL, *a = NULL;
    double v, gv;

    CHECK(sx_build_extension(lo, hi, 2, "reciprocal", NULL, -1, 0, &h) == SX_STATUS_OK);
    CHECK(sx_evaluator_multiplier(h, &g) == SX_STATUS_OK);
    CHECK(sx_eval(h, 0.5, &v) == SX_STATUS_OK);
    CHECK(sx_eval(g, 0.5, &gv) == SX_STATUS_OK);
    CHECK(fabs(v - 2.0 * gv) <= 1e-15 * fabs(v));
    CHECK(sx_eval(h, 1.5, &v) == SX_STATUS_OK && v == 0.0);
    CHECK(sx_eval_deriv(h, 3, 0.25, &v) == SX_STATUS_OK && isfinite(v));

    CHECK(sx_build_cozero(lo, hi, 2, 0, &a) == SX_STATUS_OK);
    CHECK(sx_eval(a, 2.5, &v) == SX_STATUS_OK && v > 0.0);
    CHECK(sx_eval(a, 1.5, &v) == SX_STATUS_OK && v == 0.0);

    CHECK(sx_phi_big(0.0, &v) == SX_STATUS_OK && fabs(v - 0.5) < 1e-15);
    SxEvaluator *bad = NULL;
    CHECK(sx_build_extension(lo, hi, 2, "no_such_function", NULL, -1, 0, &bad) != SX_STATUS_OK);
    CHECK(sx_last_error_message() != NULL);

    sx_evaluator_free(a);
    sx_evaluator_free(g);
    sx_evaluator_free(h);
    puts("ok");
    return 0;
}

/* min x^2 s.t. 1 - x <= 0 over [-10, 10], then the desk QCQP. */
#include <stdio.h>
#include "levelcraft.h"

static int eval(void *user, size_t piece, const double *x, size_t dim, double *value, double *grad) {
    int *calls = user;
    (void)dim;
    ++*calls;
    if (piece == 0) {
        *value = x[0] * x[0];
        grad[0] = 2.0 * x[0];
    } else {
        *value = 1.0 - x[0];
        grad[0] = -1.0;
    }
    return 0;
}

static int report(const char *label, LcStatus st, LcReport *r) {
    if (st != LC_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", label, (int)st, lc_last_error_message());
        return 1;
    }
    double x[2] = {0.0, 0.0};
    lc_report_solution(r, x, lc_report_dim(r));
    printf("%s %s f=%.6f viol=%.2e evals=%llu x0=%.6f\n", label, lc_report_algorithm(r),
           lc_report_objective(r), lc_report_violation(r),
           (unsigned long long)lc_report_composite_evals(r), x[0]);
    lc_report_free(r);
    return 0;
}

int main(void) {
    double lo = -10.0, hi = 10.0;
    int calls = 0, failed = 0;
    LcProblem *p = NULL;
    LcReport *r = NULL;

    if (lc_problem_custom(1, 1, eval, &calls, &lo, &hi, &p) != LC_STATUS_OK) {
        fprintf(stderr, "%s\n", lc_last_error_message());
        return 1;
    }
    LcStatus st = lc_solve_apmm(p, NULL, 1.0, NULL, &r);
    failed |= report("custom", st, r);
    LcLevelOptions opts = lc_secant_options_default();
    st = lc_solve_secant(p, &opts, &r);
    failed |= report("custom", st, r);
    lc_problem_free(p);

    lc_problem_desk(1.0, &p);
    st = lc_solve_fixed_point(p, NULL, &r);
    failed |= report("desk", st, r);
    lc_problem_free(p);

    if (lc_problem_desk(-1.0, &p) != LC_STATUS_INVALID_ARGUMENT) failed = 1;
    printf("callbacks=%d version=%s\n", calls, lc_version());
    return failed;
}

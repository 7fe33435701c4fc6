#ifndef LEVELCRAFT_H
#define LEVELCRAFT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum LcStatus {
  LC_STATUS_OK = 0,
  // The solver stopped at its iteration cap. A report is still returned.
  LC_STATUS_NOT_CONVERGED = 1,
  LC_STATUS_INVALID_ARGUMENT = 2,
  LC_STATUS_NULL_POINTER = 3,
  LC_STATUS_ORACLE_FAILURE = 4,
  LC_STATUS_SUBPROBLEM_FAILURE = 5,
  // The supplied optimal value is not attainable.
  LC_STATUS_INVALID_TARGET_VALUE = 6,
  LC_STATUS_IO = 7,
  LC_STATUS_PANIC = 8,
} LcStatus;

// Opaque problem handle.
typedef struct LcProblem LcProblem;

// Opaque result of one solver run.
typedef struct LcReport LcReport;

// Evaluates piece `piece` at `x`: 0 is the objective, `i >= 1` is the
// constraint `g_i`. Writes the value and `dim` subgradient entries and
// returns 0, or returns nonzero on failure.
typedef int (*LcEvalFn)(void *user,
                        size_t piece,
                        const double *x,
                        size_t dim,
                        double *value,
                        double *grad);

// Options of the APMM solver.
typedef struct LcApmmOptions {
  double eps;
  size_t max_iters;
  // Number of retained objective cuts; 0 keeps all of them.
  size_t bundle;
  // Nonzero for the accelerated schedule, zero for the plain Polyak method.
  int accelerated;
} LcApmmOptions;

// Options of the level-set solvers.
typedef struct LcLevelOptions {
  double alpha;
  double beta;
  double nu;
  double eps;
  // Outer iteration cap; 0 derives one from the initial bracket.
  size_t max_outer;
} LcLevelOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string. The
// pointer stays valid until the next call into this library on the thread.
const char *lc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *lc_version(void);

// The desk QCQP in two variables with its constraint divided by `scale`.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum LcStatus lc_problem_desk(double scale, struct LcProblem **out);

// Random convex QCQP with `n` variables and `m` constraints.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum LcStatus lc_problem_qcqp(uint64_t seed, size_t n, size_t m, struct LcProblem **out);

// SOCP optimality system with `q` variables, `p` equality rows and `cones`
// equal second-order cones. The optimal value is 0.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum LcStatus lc_problem_socp(uint64_t seed,
                              size_t q,
                              size_t p,
                              size_t cones,
                              struct LcProblem **out);

// Joint Lyapunov LMI feasibility with `k` matrices of order `q`. The optimal
// value is 0.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum LcStatus lc_problem_lmi(uint64_t seed, size_t q, size_t k, struct LcProblem **out);

// Neyman-Pearson classification from a CSV file whose last column is the
// label. `multiclass` selects the multiclass model.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum LcStatus lc_problem_npc_csv(const char *path,
                                 int has_header,
                                 int multiclass,
                                 struct LcProblem **out);

// Problem defined by a user callback with `num_constraints` constraints over
// the box `[lower, upper]`. Either bound array may be null for an unbounded
// side; the level-set solvers need a bounded box. `user` is passed through
// untouched and must outlive the problem.
//
// # Safety
// Non-null bound arrays must hold `dim` values; `out` must be valid.
enum LcStatus lc_problem_custom(size_t dim,
                                size_t num_constraints,
                                LcEvalFn eval,
                                void *user,
                                const double *lower,
                                const double *upper,
                                struct LcProblem **out);

// Records a known optimal value, used by APMM when none is passed.
//
// # Safety
// `problem` must be a live handle or null.
enum LcStatus lc_problem_set_fstar(struct LcProblem *problem, double fstar);

// Number of variables, or 0 for a null handle.
//
// # Safety
// `problem` must be a live handle or null.
size_t lc_problem_dim(const struct LcProblem *problem);

// Number of functional constraints, or 0 for a null handle.
//
// # Safety
// `problem` must be a live handle or null.
size_t lc_problem_num_constraints(const struct LcProblem *problem);

// Releases a problem. Null is ignored.
//
// # Safety
// `problem` must come from this library and not be used afterwards.
void lc_problem_free(struct LcProblem *problem);

struct LcApmmOptions lc_apmm_options_default(void);

struct LcLevelOptions lc_fixed_point_options_default(void);

struct LcLevelOptions lc_secant_options_default(void);

// Accelerated Polyak minorant method for a problem with known optimal value.
// `fstar` may be NaN to use the value recorded on the problem. `x0` may be
// null to start from the origin projected onto the box. `options` may be
// null for the defaults.
//
// Returns `Ok` or `NotConverged` with a report in `*out`; on any other code
// `*out` is left untouched.
//
// # Safety
// `problem` must be live, a non-null `x0` must hold `dim` values and `out`
// must be valid.
enum LcStatus lc_solve_apmm(const struct LcProblem *problem,
                            const double *x0,
                            double fstar,
                            const struct LcApmmOptions *options,
                            struct LcReport **out);

// Inexact fixed-point level-set method; needs no optimal value. `options`
// may be null for the defaults. Status codes are as for [`lc_solve_apmm`].
//
// # Safety
// `problem` must be live and `out` valid.
enum LcStatus lc_solve_fixed_point(const struct LcProblem *problem,
                                   const struct LcLevelOptions *options,
                                   struct LcReport **out);

// Truncated secant level-set method; needs `beta` in (1/2, 1].
//
// # Safety
// `problem` must be live and `out` valid.
enum LcStatus lc_solve_secant(const struct LcProblem *problem,
                              const struct LcLevelOptions *options,
                              struct LcReport **out);

// Nonzero when the run met its tolerance.
//
// # Safety
// `report` must be a live handle or null.
int lc_report_converged(const struct LcReport *report);

// # Safety
// `report` must be a live handle or null.
size_t lc_report_iterations(const struct LcReport *report);

// Calls of the composite oracle, one per evaluation of all pieces.
//
// # Safety
// `report` must be a live handle or null.
uint64_t lc_report_composite_evals(const struct LcReport *report);

// Subgradient evaluations summed over the objective and all constraints.
//
// # Safety
// `report` must be a live handle or null.
uint64_t lc_report_gradient_evals(const struct LcReport *report);

// Objective at the returned point; NaN for a null handle.
//
// # Safety
// `report` must be a live handle or null.
double lc_report_objective(const struct LcReport *report);

// Largest constraint violation at the returned point; NaN for a null handle.
//
// # Safety
// `report` must be a live handle or null.
double lc_report_violation(const struct LcReport *report);

// Length of the returned point.
//
// # Safety
// `report` must be a live handle or null.
size_t lc_report_dim(const struct LcReport *report);

// Copies the returned point into `buf`, which must hold `len >= dim` values.
//
// # Safety
// `report` must be live and `buf` must hold `len` writable values.
enum LcStatus lc_report_solution(const struct LcReport *report, double *buf, size_t len);

// Solver name, e.g. `"apl-secant"`. Owned by the report.
//
// # Safety
// `report` must be a live handle or null.
const char *lc_report_algorithm(const struct LcReport *report);

// Stop reason for unconverged runs, empty otherwise. Owned by the report.
//
// # Safety
// `report` must be a live handle or null.
const char *lc_report_message(const struct LcReport *report);

// Convergence trace as CSV text with a header row. Owned by the report.
//
// # Safety
// `report` must be a live handle or null.
const char *lc_report_trace_csv(const struct LcReport *report);

// Releases a report. Null is ignored.
//
// # Safety
// `report` must come from this library and not be used afterwards.
void lc_report_free(struct LcReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEVELCRAFT_H */

/* C interface for the nlqual library.
 *
 * Conventions:
 *   - NlqProblem is an opaque handle owned by the library.
 *   - Fallible calls return an NLQ_* status code; on failure the message is
 *     available from nlq_last_error() until the next failing call on the
 *     same thread.
 *   - Results are JSON strings allocated by the library; release them with
 *     nlq_string_free().
 *   - Points and multipliers travel as comma-separated rational literals
 *     ("1", "-1/2", ...); solver starts are comma-separated floats.
 */

#ifndef NLQUAL_H
#define NLQUAL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define NLQ_OK 0
#define NLQ_ERR_ARGUMENT 1
#define NLQ_ERR_PARSE 2
#define NLQ_ERR_PRECONDITION 3
#define NLQ_ERR_INTERNAL 4

typedef struct NlqProblem NlqProblem;

/* Message for the last failing call on this thread. */
const char *nlq_last_error(void);

/* Frees a string returned through any out_json parameter. */
void nlq_string_free(char *s);

/* Parses a problem document; writes an owned handle to out on success. */
int32_t nlq_problem_parse(const char *json, NlqProblem **out);

void nlq_problem_free(NlqProblem *h);

/* Problem dimension; 0 for a null handle. */
size_t nlq_problem_dim(const NlqProblem *h);

/* Subdifferential bundle of the composite term at point_csv. */
int32_t nlq_subdiff(const NlqProblem *h, const char *point_csv,
                    char **out_json);

/* One qualification check. condition is one of: nnamcq, qn, rcpld, dqn,
 * bq, cond13, impl28, std-qn, std-rcpld. */
int32_t nlq_check(const NlqProblem *h, const char *point_csv,
                  const char *condition, uint64_t seed, char **out_json);

/* Searches for KKT multipliers at point_csv. */
int32_t nlq_kkt_find(const NlqProblem *h, const char *point_csv,
                     char **out_json);

/* Verifies supplied multipliers: lambda_csv for the inequalities, mu_csv
 * for the equalities (either may be empty). */
int32_t nlq_kkt_verify(const NlqProblem *h, const char *point_csv,
                       const char *lambda_csv, const char *mu_csv,
                       char **out_json);

/* Doubles rho from 1 until local exactness validates around point_csv. */
int32_t nlq_find_rho0(const NlqProblem *h, const char *point_csv,
                      double radius, size_t samples, uint64_t seed,
                      double rho_cap, char **out_json);

/* Minimizes the rho-penalized problem by proximal gradient. norm is one of
 * "l1", "l2", "linf"; start_csv may be NULL for an origin start. */
int32_t nlq_solve(const NlqProblem *h, double rho, const char *norm,
                  const char *start_csv, uint64_t seed, char **out_json);

#ifdef __cplusplus
}
#endif

#endif /* NLQUAL_H */

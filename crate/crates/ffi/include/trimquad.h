#ifndef TRIMQUAD_H
#define TRIMQUAD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum TqStatus {
  TQ_STATUS_OK = 0,
  TQ_STATUS_NULL_POINTER = 1,
  TQ_STATUS_INVALID_ARGUMENT = 2,
  // Trimming geometry could not be processed.
  TQ_STATUS_GEOMETRY = 3,
  // Quadrature construction failed.
  TQ_STATUS_QUADRATURE = 4,
  // Matrix not positive definite or too ill-conditioned.
  TQ_STATUS_SOLVER = 5,
  // Buffer too small.
  TQ_STATUS_BUFFER_TOO_SMALL = 6,
  TQ_STATUS_PANIC = 7,
} TqStatus;

typedef enum TqCase {
  TQ_CASE_LINE = 0,
  TQ_CASE_CIRCLE = 1,
  TQ_CASE_CORNER = 2,
  TQ_CASE_UNTRIMMED = 3,
} TqCase;

typedef enum TqStrategy {
  TQ_STRATEGY_REFERENCE = 0,
  TQ_STRATEGY_WQ = 1,
  TQ_STRATEGY_HYBRID = 2,
  TQ_STRATEGY_DWQ = 3,
} TqStrategy;

// A mass matrix in compressed sparse row form over the retained dofs.
typedef struct TqMatrix TqMatrix;

// A trimmed spline space of one degree on a uniform mesh.
typedef struct TqProblem TqProblem;

// Summary of one L2 projection.
typedef struct TqProjection {
  // Relative L2 error on the valid domain.
  double l2_rel;
  // Condition estimate of the diagonally scaled mass matrix.
  double condition;
  double relative_residual;
  // Number of retained degrees of freedom.
  size_t dofs;
} TqProjection;

// Target function `f(x, y, user_data)` for [`tq_project_fn`].
typedef double (*TqTarget)(double x, double y, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds the space of degree `degree` on an `elements` x `elements` mesh of
// the unit square, trimmed by `case`.
//
// # Safety
// `out` must be valid for writing one pointer.
enum TqStatus tq_problem_new(enum TqCase case_,
                             size_t degree,
                             size_t elements,
                             struct TqProblem **out);

// # Safety
// `problem` must come from [`tq_problem_new`] and not be used afterwards.
void tq_problem_free(struct TqProblem *problem);

// Forms the mass matrix of `problem` with `strategy`.
//
// # Safety
// `problem` must be a live handle and `out` valid for writing one pointer.
enum TqStatus tq_assemble(const struct TqProblem *problem,
                          enum TqStrategy strategy,
                          struct TqMatrix **out);

// Number of rows, or 0 for a null handle.
//
// # Safety
// `matrix` must be null or a live handle.
size_t tq_matrix_dim(const struct TqMatrix *matrix);

// Number of stored entries, or 0 for a null handle.
//
// # Safety
// `matrix` must be null or a live handle.
size_t tq_matrix_nnz(const struct TqMatrix *matrix);

// Copies the CSR arrays into caller buffers. `row_ptr` needs `dim + 1`
// entries, `cols` and `vals` need `nnz`, `dofs` (global index of each row,
// may be null) needs `dim`. Buffer lengths are passed so that short buffers
// are reported instead of overrun.
//
// # Safety
// Each non-null buffer must be valid for writing its stated length.
enum TqStatus tq_matrix_csr(const struct TqMatrix *matrix,
                            size_t *row_ptr,
                            size_t row_ptr_len,
                            size_t *cols,
                            double *vals,
                            size_t nnz_len,
                            size_t *dofs,
                            size_t dofs_len);

// Frobenius norm of `a - b` for matrices on the same space.
//
// # Safety
// `a` and `b` must be live handles and `out` valid for writing.
enum TqStatus tq_matrix_deviation(const struct TqMatrix *a, const struct TqMatrix *b, double *out);

// # Safety
// `matrix` must come from [`tq_assemble`] and not be used afterwards.
void tq_matrix_free(struct TqMatrix *matrix);

// Projects `sin(2x) cos(3y)` onto the space of `problem`.
//
// # Safety
// `problem` must be a live handle and `out` valid for writing.
enum TqStatus tq_project(const struct TqProblem *problem,
                         enum TqStrategy strategy,
                         struct TqProjection *out);

// Projects a caller-supplied function. The callback is invoked on the
// calling thread only and must not unwind.
//
// # Safety
// `problem` must be a live handle, `out` valid for writing, and `target`
// safe to call with `user_data`.
enum TqStatus tq_project_fn(const struct TqProblem *problem,
                            enum TqStrategy strategy,
                            TqTarget target,
                            void *user_data,
                            struct TqProjection *out);

// Copies the message of the last failed call on this thread into `buf`,
// NUL-terminated and truncated to `len`. Returns the full message length
// without the terminator.
//
// # Safety
// `buf` must be null or valid for writing `len` bytes.
size_t tq_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *tq_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIMQUAD_H */

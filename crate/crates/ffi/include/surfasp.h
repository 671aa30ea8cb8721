#ifndef SURFASP_H
#define SURFASP_H

#include <stdbool.h>
#include <stddef.h>

typedef enum SurfaspDiscretization {
  SURFASP_DISCRETIZATION_P1 = 0,
  SURFASP_DISCRETIZATION_CR = 1,
  SURFASP_DISCRETIZATION_DG = 2,
} SurfaspDiscretization;

typedef enum SurfaspPreconditioner {
  SURFASP_PRECONDITIONER_FASP_ADDITIVE = 0,
  SURFASP_PRECONDITIONER_FASP_MULTIPLICATIVE = 1,
  SURFASP_PRECONDITIONER_TWO_LEVEL_ADDITIVE = 2,
  SURFASP_PRECONDITIONER_TWO_LEVEL_MULTIPLICATIVE = 3,
  SURFASP_PRECONDITIONER_JACOBI = 4,
} SurfaspPreconditioner;

// Result code of every fallible call.
typedef enum SurfaspStatus {
  SURFASP_STATUS_OK = 0,
  SURFASP_STATUS_NULL_POINTER = 1,
  SURFASP_STATUS_INVALID_ARGUMENT = 2,
  SURFASP_STATUS_INVALID_MESH = 3,
  SURFASP_STATUS_PROJECTION = 4,
  SURFASP_STATUS_NUMERICAL_BREAKDOWN = 5,
  SURFASP_STATUS_IO = 6,
  SURFASP_STATUS_BUFFER_TOO_SMALL = 7,
  SURFASP_STATUS_PANIC = 8,
} SurfaspStatus;

typedef enum SurfaspSurface {
  // Torus with major radius 2 and tube radius 0.5 in R^3.
  SURFASP_SURFACE_TORUS = 0,
  // Unit 3-sphere in R^4.
  SURFASP_SURFACE_S3 = 1,
  // Unit sphere in R^3.
  SURFASP_SURFACE_SPHERE2 = 2,
} SurfaspSurface;

// Opaque nested mesh hierarchy.
typedef struct SurfaspHierarchy SurfaspHierarchy;

// Opaque discrete solution vector.
typedef struct SurfaspSolution SurfaspSolution;

// Parameters of a solve on the finest level of a hierarchy.
typedef struct SurfaspSolveOptions {
  enum SurfaspDiscretization discretization;
  enum SurfaspPreconditioner preconditioner;
  // Reaction coefficient, 0 or positive.
  double c;
  // DG penalty; NaN selects the default for the surface dimension.
  double alpha;
  // Relative residual tolerance.
  double tol;
  size_t max_iterations;
} SurfaspSolveOptions;

// Summary of a finished solve.
typedef struct SurfaspReport {
  size_t iterations;
  double final_residual;
  // L2 error against the exact solution; NaN when none is known.
  double l2_error;
  bool converged;
  size_t num_dofs;
} SurfaspReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buffer` as a
// NUL-terminated string and returns the number of bytes required, including
// the terminator. Nothing is written when `buffer` is null or `len` is too
// small.
size_t surfasp_last_error_message(char *buffer, size_t len);

// Default options: P1 with the multiplicative FASP preconditioner, c = 1,
// tolerance 1e-6 and at most 2000 iterations.
struct SurfaspSolveOptions surfasp_solve_options_default(void);

// Builds the hierarchy of `levels` uniform refinements of the initial mesh
// of `surface`. On success `*out` owns the new handle.
enum SurfaspStatus surfasp_hierarchy_new(enum SurfaspSurface surface,
                                         size_t levels,
                                         struct SurfaspHierarchy **out);

// Releases a hierarchy; null is ignored.
void surfasp_hierarchy_free(struct SurfaspHierarchy *hierarchy);

// Number of levels, i.e. refinements plus one; 0 for a null handle.
size_t surfasp_hierarchy_num_levels(const struct SurfaspHierarchy *hierarchy);

// Cell and vertex counts of the mesh on `level`.
enum SurfaspStatus surfasp_hierarchy_mesh_size(const struct SurfaspHierarchy *hierarchy,
                                               size_t level,
                                               size_t *num_cells,
                                               size_t *num_vertices);

// Writes the mesh of `level` in the text mesh format. `reference` selects
// the flat reference mesh instead of the projected one.
enum SurfaspStatus surfasp_hierarchy_write_mesh(const struct SurfaspHierarchy *hierarchy,
                                                size_t level,
                                                bool reference,
                                                const char *path);

// Solves the model problem on the finest level of `hierarchy`. The report
// is written to `*report`; when `solution` is non-null `*solution` receives
// a new handle to the coefficient vector. A solve that stops at the
// iteration limit still succeeds with `converged` false.
enum SurfaspStatus surfasp_solve(const struct SurfaspHierarchy *hierarchy,
                                 const struct SurfaspSolveOptions *options,
                                 struct SurfaspReport *report,
                                 struct SurfaspSolution **solution);

// Number of coefficients; 0 for a null handle.
size_t surfasp_solution_len(const struct SurfaspSolution *solution);

// Copies the coefficients into `buffer`, which must hold `len` values.
enum SurfaspStatus surfasp_solution_copy(const struct SurfaspSolution *solution,
                                         double *buffer,
                                         size_t len);

// Releases a solution; null is ignored.
void surfasp_solution_free(struct SurfaspSolution *solution);

// Signed distance of the point `x` (of length `dim`, the ambient
// dimension of `surface`) to the surface; negative inside.
enum SurfaspStatus surfasp_signed_distance(enum SurfaspSurface surface,
                                           const double *x,
                                           size_t dim,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFASP_H */

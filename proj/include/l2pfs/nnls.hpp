#pragma once

#include "l2pfs/matrix.hpp"
#include "l2pfs/solution_space.hpp"

namespace l2pfs {

struct NnlsProblem {
  Matrix design;
  Vector target;
  int max_iterations = 0;    // <= 0 selects 10 * variable count
  double tolerance = 1e-10;  // dual feasibility, scaled by 1 + ||A^T b||_inf
};

struct NnlsResult {
  Vector x;
  int iterations = 0;
  bool converged = true;
};

// Lawson-Hanson active-set solver for min ||A x - b||_2 s.t. x >= 0.
// The returned x is nonnegative exactly: active coordinates are set to
// literal zero, passive ones come from a strictly positive least-squares
// solve. If the iteration budget runs out the best feasible iterate is
// returned with converged == false.
NnlsResult nnls(const NnlsProblem& problem);

// E-step subproblem  min ||diag(lambda) (L E + H)||_F^2  s.t.  Y (.) E >= 0.
// Columns decouple; each is reduced to plain NNLS through E = Y (.) T with
// T >= 0. Rows with lambda == 0 drop out of the residual. Columns whose
// NNLS exhausted its budget are counted into *exhausted_columns if given.
Matrix solve_e_step(const Vector& lambda_diag, const Matrix& l, const Matrix& h,
                    const LabelMatrix& y, int max_iterations = 0,
                    double tolerance = 1e-10, int* exhausted_columns = nullptr);

}  // namespace l2pfs

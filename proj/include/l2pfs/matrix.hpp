#pragma once

#include <Eigen/Dense>

#include <vector>

namespace l2pfs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Reduced row echelon form together with the row-operation matrix that
// produced it: transform * input == reduced. Columns are never permuted;
// pivot_columns records where the pivots landed, left to right.
struct RrefResult {
  Matrix reduced;
  Matrix transform;
  Eigen::Index rank = 0;
  std::vector<Eigen::Index> pivot_columns;
};

// Row-wise mixed norm (sum_i ||a_i||_2^p)^(1/p) for p in (0, 2].
// Zero rows contribute nothing. Throws std::invalid_argument for p
// outside (0, 2] or non-finite input.
double l2p_norm(const Matrix& a, double p);

// Moore-Penrose pseudo-inverse via SVD. Singular values at or below
// max(rows, cols) * eps * sigma_max are treated as zero.
Matrix pseudo_inverse(const Matrix& a);

// Gauss-Jordan elimination with partial pivoting and a tracked transform.
// Entries with magnitude at or below 1e-12 * max|a(i,j)| are flushed to
// exact zero so rank decisions are deterministic.
RrefResult rref_tracked(const Matrix& a);

// Solves a * x = b for square a via LU. Throws std::runtime_error when the
// reciprocal condition estimate falls below min_rcond.
Matrix solve_linear(const Matrix& a, const Matrix& b, double min_rcond = 1e-14);

}  // namespace l2pfs

#include "l2pfs/nnls.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace l2pfs {

namespace {

// Least squares over the passive columns only, via column-pivoted QR.
// Returns the full-length vector with zeros on active coordinates.
Vector passive_least_squares(const Matrix& a, const Vector& b,
                             const std::vector<Eigen::Index>& passive) {
  Matrix ap(a.rows(), static_cast<Eigen::Index>(passive.size()));
  for (std::size_t k = 0; k < passive.size(); ++k) {
    ap.col(static_cast<Eigen::Index>(k)) = a.col(passive[k]);
  }
  const Vector zp = ap.colPivHouseholderQr().solve(b);
  Vector z = Vector::Zero(a.cols());
  for (std::size_t k = 0; k < passive.size(); ++k) {
    z(passive[k]) = zp(static_cast<Eigen::Index>(k));
  }
  return z;
}

}  // namespace

NnlsResult nnls(const NnlsProblem& problem) {
  const Matrix& a = problem.design;
  const Vector& b = problem.target;
  const Eigen::Index n = a.cols();
  if (b.size() != a.rows()) {
    throw std::invalid_argument("nnls: target length does not match design rows");
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("nnls: non-finite input");
  }
  if (!(problem.tolerance > 0.0)) {
    throw std::invalid_argument("nnls: tolerance must be positive");
  }

  NnlsResult res;
  res.x = Vector::Zero(n);
  if (n == 0) {
    return res;
  }

  const int budget = problem.max_iterations > 0 ? problem.max_iterations
                                                : 10 * static_cast<int>(n);
  // The entering test compares each dual a_j^T r against
  // tolerance * ||a_j|| * ||r||, so it is invariant under any uniform or
  // per-row rescaling of (A, b) and keeps discriminating after the residual
  // has shrunk by many orders of magnitude (a fixed scale tied to A^T b goes
  // blind exactly then).
  Vector col_norms(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    col_norms(j) = a.col(j).norm();
  }

  std::vector<bool> in_passive(static_cast<std::size_t>(n), false);
  // A coordinate whose trial solve cannot move the iterate (degenerate or
  // rank-deficient direction) is masked until the iterate changes; without
  // the mask the outer loop would re-select it forever.
  std::vector<bool> usable(static_cast<std::size_t>(n), true);
  std::vector<Eigen::Index> passive;
  passive.reserve(static_cast<std::size_t>(n));

  int iter = 0;
  res.converged = false;
  while (true) {
    // Dual vector at the current feasible x; the largest positive entry on
    // the active set is the steepest descent coordinate to free.
    const Vector r = b - a * res.x;
    const double r_norm = r.norm();
    const Vector w = a.transpose() * r;
    Eigen::Index enter = -1;
    double enter_w = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::size_t js = static_cast<std::size_t>(j);
      if (in_passive[js] || !usable[js]) {
        continue;
      }
      if (w(j) > problem.tolerance * col_norms(j) * r_norm && w(j) > enter_w) {
        enter_w = w(j);
        enter = j;
      }
    }
    if (enter < 0) {
      res.converged = true;  // KKT: active duals below tolerance, passive at LS optimum
      break;
    }
    if (iter >= budget) {
      break;  // budget spent; res.x is the best feasible iterate so far
    }
    const Vector x_before = res.x;
    in_passive[static_cast<std::size_t>(enter)] = true;
    passive.push_back(enter);
    std::sort(passive.begin(), passive.end());

    // Inner loop: restore strict positivity on the passive set. Each pass
    // either accepts the subproblem solution or evicts at least one
    // coordinate, so it ends within |passive| rounds.
    while (iter < budget) {
      ++iter;
      const Vector z = passive_least_squares(a, b, passive);
      bool all_positive = true;
      for (Eigen::Index j : passive) {
        if (z(j) <= 0.0) {
          all_positive = false;
          break;
        }
      }
      if (all_positive) {
        res.x = z;
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      Eigen::Index blocking = -1;
      for (Eigen::Index j : passive) {
        if (z(j) <= 0.0) {
          const double denom = res.x(j) - z(j);
          const double step = denom > 0.0 ? res.x(j) / denom : 0.0;
          if (step < alpha) {
            alpha = step;
            blocking = j;
          }
        }
      }
      res.x += alpha * (z - res.x);
      std::vector<Eigen::Index> keep;
      keep.reserve(passive.size());
      for (Eigen::Index j : passive) {
        // The blocking coordinate leaves with a literal zero, as does any
        // coordinate numerical noise pushed past the boundary.
        if (j == blocking || res.x(j) <= 0.0) {
          res.x(j) = 0.0;
          in_passive[static_cast<std::size_t>(j)] = false;
        } else {
          keep.push_back(j);
        }
      }
      passive.swap(keep);
      if (passive.empty()) {
        res.x.setZero();
        break;
      }
    }
    if ((res.x - x_before).cwiseAbs().maxCoeff() == 0.0) {
      usable[static_cast<std::size_t>(enter)] = false;
    } else {
      std::fill(usable.begin(), usable.end(), true);
    }
  }
  res.iterations = iter;
  return res;
}

Matrix solve_e_step(const Vector& lambda_diag, const Matrix& l, const Matrix& h,
                    const LabelMatrix& y, int max_iterations, double tolerance,
                    int* exhausted_columns) {
  const Eigen::Index m0 = l.rows();
  const Eigen::Index m = l.cols();
  const Eigen::Index c = h.cols();
  if (lambda_diag.size() != m0 || h.rows() != m0) {
    throw std::invalid_argument("solve_e_step: weight or offset size mismatch");
  }
  if (y.values.rows() != m || y.values.cols() != c) {
    throw std::invalid_argument("solve_e_step: label matrix shape mismatch");
  }
  if ((lambda_diag.array() < 0.0).any()) {
    throw std::invalid_argument("solve_e_step: negative weight");
  }

  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(m0));
  for (Eigen::Index i = 0; i < m0; ++i) {
    if (lambda_diag(i) > 0.0) {
      keep.push_back(i);
    }
  }
  const Eigen::Index mk = static_cast<Eigen::Index>(keep.size());
  Matrix lw(mk, m);
  Matrix hw(mk, c);
  for (Eigen::Index r = 0; r < mk; ++r) {
    lw.row(r) = lambda_diag(keep[static_cast<std::size_t>(r)]) * l.row(keep[static_cast<std::size_t>(r)]);
    hw.row(r) = lambda_diag(keep[static_cast<std::size_t>(r)]) * h.row(keep[static_cast<std::size_t>(r)]);
  }

  if (exhausted_columns) {
    *exhausted_columns = 0;
  }
  Matrix e(m, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    // Substituting E_j = y_j (.) t with t >= 0 turns the sign constraint
    // into plain nonnegativity on t.
    NnlsProblem sub;
    sub.design = lw.array().rowwise() * y.values.col(j).transpose().array();
    sub.target = -hw.col(j);
    sub.max_iterations = max_iterations;
    sub.tolerance = tolerance;
    const NnlsResult r = nnls(sub);
    if (!r.converged && exhausted_columns) {
      ++*exhausted_columns;
    }
    e.col(j) = y.values.col(j).cwiseProduct(r.x);
  }
  return e;
}

}  // namespace l2pfs

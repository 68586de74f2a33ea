#include "l2pfs/matrix.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace l2pfs {

namespace {

constexpr double kFlushFactor = 1e-12;

}  // namespace

double l2p_norm(const Matrix& a, double p) {
  if (!(p > 0.0 && p <= 2.0)) {
    throw std::invalid_argument("l2p_norm: p must lie in (0, 2], got " + std::to_string(p));
  }
  if (!a.allFinite()) {
    throw std::invalid_argument("l2p_norm: non-finite input");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double r = a.row(i).norm();
    if (r > 0.0) {
      acc += std::pow(r, p);
    }
  }
  return acc > 0.0 ? std::pow(acc, 1.0 / p) : 0.0;
}

Matrix pseudo_inverse(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw std::invalid_argument("pseudo_inverse: empty matrix");
  }
  if (!a.allFinite()) {
    throw std::invalid_argument("pseudo_inverse: non-finite input");
  }
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw std::runtime_error("pseudo_inverse: SVD failed to converge");
  }
  const Vector& sv = svd.singularValues();
  const double cutoff = static_cast<double>(std::max(a.rows(), a.cols())) *
                        std::numeric_limits<double>::epsilon() *
                        (sv.size() > 0 ? sv(0) : 0.0);
  Vector inv = Vector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    inv(i) = sv(i) > cutoff ? 1.0 / sv(i) : 0.0;
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

RrefResult rref_tracked(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw std::invalid_argument("rref_tracked: empty matrix");
  }
  if (!a.allFinite()) {
    throw std::invalid_argument("rref_tracked: non-finite input");
  }
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();

  RrefResult out;
  out.reduced = a;
  out.transform = Matrix::Identity(m, m);
  const double flush = kFlushFactor * a.cwiseAbs().maxCoeff();

  Eigen::Index row = 0;
  for (Eigen::Index col = 0; col < n && row < m; ++col) {
    Eigen::Index piv = row;
    double best = std::abs(out.reduced(row, col));
    for (Eigen::Index r = row + 1; r < m; ++r) {
      const double v = std::abs(out.reduced(r, col));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best <= flush) {
      continue;  // no usable pivot in this column
    }
    if (piv != row) {
      out.reduced.row(piv).swap(out.reduced.row(row));
      out.transform.row(piv).swap(out.transform.row(row));
    }
    const double pivot = out.reduced(row, col);
    out.reduced.row(row) /= pivot;
    out.transform.row(row) /= pivot;
    out.reduced(row, col) = 1.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (r == row) continue;
      const double f = out.reduced(r, col);
      if (f != 0.0) {
        out.reduced.row(r) -= f * out.reduced.row(row);
        out.transform.row(r) -= f * out.transform.row(row);
        out.reduced(r, col) = 0.0;
      }
    }
    out.pivot_columns.push_back(col);
    ++row;
  }

  out.rank = row;
  // Residue from cancellation stays below the flush threshold; clear it so
  // zero rows are literal zeros.
  out.reduced = (out.reduced.cwiseAbs().array() <= flush).select(0.0, out.reduced);
  return out;
}

Matrix solve_linear(const Matrix& a, const Matrix& b, double min_rcond) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("solve_linear: matrix must be square");
  }
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("solve_linear: right-hand side has wrong row count");
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("solve_linear: non-finite input");
  }
  if (a.rows() == 0) {
    return Matrix(0, b.cols());
  }
  Eigen::PartialPivLU<Matrix> lu(a);
  const double rc = lu.rcond();
  if (!(rc >= min_rcond)) {
    throw std::runtime_error("solve_linear: matrix is singular or near-singular (rcond " +
                             std::to_string(rc) + ")");
  }
  return lu.solve(b);
}

}  // namespace l2pfs

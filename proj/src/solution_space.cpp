#include "l2pfs/solution_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace l2pfs {

void validate_dataset(const Dataset& dataset) {
  const Eigen::Index m = dataset.features.rows();
  if (m == 0 || dataset.features.cols() == 0) {
    throw std::invalid_argument("dataset: empty feature matrix");
  }
  if (!dataset.features.allFinite()) {
    throw std::invalid_argument("dataset: non-finite feature value");
  }
  if (static_cast<Eigen::Index>(dataset.labels.size()) != m) {
    throw std::invalid_argument("dataset: label count does not match sample count");
  }
  if (dataset.class_count < 2) {
    throw std::invalid_argument("dataset: need at least two classes");
  }
  std::vector<bool> seen(static_cast<std::size_t>(dataset.class_count), false);
  for (int id : dataset.labels) {
    if (id < 1 || id > dataset.class_count) {
      throw std::invalid_argument("dataset: label id " + std::to_string(id) +
                                  " outside 1.." + std::to_string(dataset.class_count));
    }
    seen[static_cast<std::size_t>(id - 1)] = true;
  }
  for (int c = 0; c < dataset.class_count; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) {
      throw std::invalid_argument("dataset: class " + std::to_string(c + 1) + " has no samples");
    }
  }
}

LabelMatrix build_label_matrix(const std::vector<int>& labels, int class_count) {
  if (labels.empty()) {
    throw std::invalid_argument("build_label_matrix: no labels");
  }
  if (class_count < 2) {
    throw std::invalid_argument("build_label_matrix: need at least two classes");
  }
  LabelMatrix out;
  out.values = Matrix::Constant(static_cast<Eigen::Index>(labels.size()), class_count, -1.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int id = labels[i];
    if (id < 1 || id > class_count) {
      throw std::invalid_argument("build_label_matrix: label id " + std::to_string(id) +
                                  " outside 1.." + std::to_string(class_count));
    }
    out.values(static_cast<Eigen::Index>(i), id - 1) = 1.0;
  }
  return out;
}

Matrix absorb_bias(const Matrix& features) {
  Matrix x(features.rows(), features.cols() + 1);
  x.leftCols(features.cols()) = features;
  x.col(features.cols()).setOnes();
  return x;
}

Dataset normalize(const Dataset& dataset) {
  const Eigen::Index m = dataset.features.rows();
  const Eigen::Index n = dataset.features.cols();
  if (m < 2) {
    throw std::invalid_argument("normalize: need at least two samples");
  }
  NormalizationStats stats;
  stats.mean = dataset.features.colwise().mean();
  stats.stddev = Vector::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double var =
        (dataset.features.col(j).array() - stats.mean(j)).square().sum() / double(m - 1);
    stats.stddev(j) = var > 0.0 ? std::sqrt(var) : 0.0;
  }
  return apply_normalization(dataset, stats);
}

Dataset apply_normalization(const Dataset& dataset, const NormalizationStats& stats) {
  const Eigen::Index n = dataset.features.cols();
  if (stats.mean.size() != n || stats.stddev.size() != n) {
    throw std::invalid_argument("apply_normalization: statistics have wrong width");
  }
  Dataset out = dataset;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (stats.stddev(j) > 0.0) {
      out.features.col(j) = (dataset.features.col(j).array() - stats.mean(j)) / stats.stddev(j);
    } else {
      out.features.col(j).setZero();  // constant column carries no signal
    }
  }
  out.normalization = stats;
  return out;
}

SolutionSpace build_solution_space(const Matrix& x, const LabelMatrix& y) {
  if (x.rows() != y.values.rows()) {
    throw std::invalid_argument("build_solution_space: X and Y row counts differ");
  }
  if (!x.allFinite() || !y.values.allFinite()) {
    throw std::invalid_argument("build_solution_space: non-finite input");
  }
  const Eigen::Index m = x.rows();
  const Eigen::Index n = x.cols();

  const Matrix xplus = pseudo_inverse(x);
  const Matrix proj = x * xplus;  // orthogonal projector onto col(X)
  const RrefResult rr = rref_tracked(x);
  if (rr.rank == 0) {
    throw std::invalid_argument("build_solution_space: design matrix has rank zero");
  }

  SolutionSpace space;
  space.m0 = rr.rank;
  space.n0 = n - rr.rank;
  space.pivot_columns = rr.pivot_columns;
  space.free_columns.reserve(static_cast<std::size_t>(space.n0));
  {
    std::size_t next_pivot = 0;
    for (Eigen::Index col = 0; col < n; ++col) {
      if (next_pivot < rr.pivot_columns.size() && rr.pivot_columns[next_pivot] == col) {
        ++next_pivot;
      } else {
        space.free_columns.push_back(col);
      }
    }
  }

  // Negating the non-pivot block makes P a null-space basis: X P = 0.
  space.M.resize(space.m0, space.n0);
  for (Eigen::Index i = 0; i < space.n0; ++i) {
    space.M.col(i) = -rr.reduced.col(space.free_columns[static_cast<std::size_t>(i)]).head(space.m0);
  }

  space.L = (rr.transform * proj).topRows(space.m0);
  space.N = space.L * y.values;

  space.P = Matrix::Zero(n, space.n0);
  space.Q = Matrix::Zero(n, y.values.cols());
  for (Eigen::Index j = 0; j < space.m0; ++j) {
    const Eigen::Index row = space.pivot_columns[static_cast<std::size_t>(j)];
    space.P.row(row) = space.M.row(j);
    space.Q.row(row) = space.N.row(j);
  }
  for (Eigen::Index i = 0; i < space.n0; ++i) {
    space.P(space.free_columns[static_cast<std::size_t>(i)], i) = 1.0;
  }
  space.projector_applied = true;
  (void)m;
  return space;
}

Matrix assemble_weights(const SolutionSpace& space, const Matrix& u, const Matrix& e) {
  const Eigen::Index c = space.N.cols();
  if (u.rows() != space.n0 || u.cols() != c) {
    throw std::invalid_argument("assemble_weights: U has wrong shape");
  }
  if (e.rows() != space.L.cols() || e.cols() != c) {
    throw std::invalid_argument("assemble_weights: E has wrong shape");
  }
  const Eigen::Index n = space.P.rows();
  const Matrix pivot_block = space.M * u + space.N + space.L * e;
  Matrix w = Matrix::Zero(n, c);
  for (Eigen::Index j = 0; j < space.m0; ++j) {
    w.row(space.pivot_columns[static_cast<std::size_t>(j)]) = pivot_block.row(j);
  }
  for (Eigen::Index i = 0; i < space.n0; ++i) {
    w.row(space.free_columns[static_cast<std::size_t>(i)]) = u.row(i);
  }
  return w;
}

}  // namespace l2pfs

#pragma once

#include "l2pfs/matrix.hpp"

#include <optional>
#include <string>
#include <vector>

namespace l2pfs {

// Per-column standardization parameters. stddev == 0 marks a constant
// column; such columns map to all zeros when applied.
struct NormalizationStats {
  Vector mean;
  Vector stddev;
};

struct Dataset {
  Matrix features;                       // m x n, one row per sample
  std::vector<int> labels;               // contiguous class ids 1..class_count
  int class_count = 0;
  std::vector<std::string> class_names;  // id-1 -> original label text
  std::optional<NormalizationStats> normalization;
};

// One-vs-rest encoding: +1 in the column of the sample's class, -1 elsewhere.
struct LabelMatrix {
  Matrix values;  // m x c
};

// Affine parameterization of every W solving X W = X X+ (Y + E):
//
//   W = P U + Q + scatter(L E)
//
// where scatter() places an m0 x c block on the pivot rows and zeros
// elsewhere. P carries M on the pivot rows and the identity on the free
// rows; M is stored with the sign that makes X P = 0 hold exactly.
struct SolutionSpace {
  Eigen::Index m0 = 0;  // rank of X
  Eigen::Index n0 = 0;  // nullity, X.cols() - m0
  Matrix M;             // m0 x n0
  Matrix N;             // m0 x c, top rows of D X X+ Y
  Matrix L;             // m0 x m, top rows of D X X+
  Matrix P;             // n x n0
  Matrix Q;             // n x c
  std::vector<Eigen::Index> pivot_columns;
  std::vector<Eigen::Index> free_columns;
  bool projector_applied = true;
};

// Checks label/shape consistency: labels sized to the rows, ids in
// [1, class_count], every class present, finite features.
void validate_dataset(const Dataset& dataset);

LabelMatrix build_label_matrix(const std::vector<int>& labels, int class_count);

// Appends a column of ones so the bias rides along as the last weight row.
Matrix absorb_bias(const Matrix& features);

// Standardizes each column to mean 0 and unit sample standard deviation
// (divides by m-1 under the square root). Constant columns become all
// zeros. The fitted statistics are recorded on the returned dataset.
Dataset normalize(const Dataset& dataset);

// Applies previously fitted statistics, e.g. train stats to test data.
Dataset apply_normalization(const Dataset& dataset, const NormalizationStats& stats);

// Builds the parameterization from the tracked RREF of x and the projected
// right-hand side x x+ (Y + E). Throws if x has rank zero.
SolutionSpace build_solution_space(const Matrix& x, const LabelMatrix& y);

// W with pivot rows M U + N + L E and free rows U, in original row order.
Matrix assemble_weights(const SolutionSpace& space, const Matrix& u, const Matrix& e);

}  // namespace l2pfs

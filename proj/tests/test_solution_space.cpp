#include "l2pfs/solution_space.hpp"

#include "l2pfs/matrix.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using l2pfs::Dataset;
using l2pfs::LabelMatrix;
using l2pfs::Matrix;
using l2pfs::SolutionSpace;
using l2pfs::Vector;

namespace {

Dataset tiny_dataset(const Matrix& features, std::vector<int> labels, int class_count) {
  Dataset d;
  d.features = features;
  d.labels = std::move(labels);
  d.class_count = class_count;
  for (int c = 1; c <= class_count; ++c) {
    d.class_names.push_back(std::to_string(c));
  }
  return d;
}

}  // namespace

TEST_SUITE("solution_space") {

TEST_CASE("build_label_matrix frozen encodings") {
  const LabelMatrix y = l2pfs::build_label_matrix({1, 2, 1}, 2);
  Matrix want(3, 2);
  want << 1, -1, -1, 1, 1, -1;
  CHECK((y.values - want).norm() == 0.0);

  const LabelMatrix single = l2pfs::build_label_matrix({2}, 2);
  Matrix want1(1, 2);
  want1 << -1, 1;
  CHECK((single.values - want1).norm() == 0.0);

  const LabelMatrix three = l2pfs::build_label_matrix({3, 1, 2}, 3);
  REQUIRE(three.values.rows() == 3);
  REQUIRE(three.values.cols() == 3);
  std::set<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(three.values.row(i).sum() == doctest::Approx(-1.0));  // exactly one +1
    std::vector<double> row(3);
    for (Eigen::Index j = 0; j < 3; ++j) row[j] = three.values(i, j);
    rows.insert(row);
  }
  CHECK(rows.size() == 3);
  CHECK(three.values(0, 2) == 1.0);
  CHECK(three.values(1, 0) == 1.0);
  CHECK(three.values(2, 1) == 1.0);
}

TEST_CASE("build_label_matrix rejects out-of-range ids") {
  CHECK_THROWS_AS(l2pfs::build_label_matrix({1, 3}, 2), std::invalid_argument);
  CHECK_THROWS_AS(l2pfs::build_label_matrix({0}, 2), std::invalid_argument);
  CHECK_THROWS_AS(l2pfs::build_label_matrix({1}, 1), std::invalid_argument);
}

TEST_CASE("absorb_bias appends a ones column") {
  Matrix a(1, 2);
  a << 1, 2;
  const Matrix out = l2pfs::absorb_bias(a);
  REQUIRE(out.rows() == 1);
  REQUIRE(out.cols() == 3);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 2.0);
  CHECK(out(0, 2) == 1.0);

  const Matrix z = l2pfs::absorb_bias(Matrix::Zero(3, 2));
  REQUIRE(z.cols() == 3);
  CHECK(z.leftCols(2).norm() == 0.0);
  CHECK((z.col(2) - Vector::Ones(3)).norm() == 0.0);
}

TEST_CASE("normalize frozen values and recorded statistics") {
  Matrix f(2, 1);
  f << 1, 3;
  const Dataset d = l2pfs::normalize(tiny_dataset(f, {1, 2}, 2));
  CHECK(d.features(0, 0) == doctest::Approx(-0.7071).epsilon(1e-4));
  CHECK(d.features(1, 0) == doctest::Approx(0.7071).epsilon(1e-4));
  REQUIRE(d.normalization.has_value());
  CHECK(d.normalization->mean(0) == doctest::Approx(2.0));
  CHECK(d.normalization->stddev(0) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("normalize maps constant columns to zero") {
  Matrix f(3, 2);
  f << 5, 1, 5, 2, 5, 6;
  const Dataset d = l2pfs::normalize(tiny_dataset(f, {1, 2, 1}, 2));
  CHECK(d.features.col(0).norm() == 0.0);
  REQUIRE(d.normalization.has_value());
  CHECK(d.normalization->stddev(0) == 0.0);
  CHECK(d.normalization->stddev(1) > 0.0);
}

TEST_CASE("normalize yields mean zero and unit sample deviation") {
  std::mt19937_64 rng(21);
  Matrix f = oracles::random_matrix(rng, 9, 4);
  f.col(1) *= 50.0;
  f.col(2).array() += 7.0;
  std::vector<int> labels;
  for (int i = 0; i < 9; ++i) labels.push_back(i % 2 + 1);
  const Dataset d = l2pfs::normalize(tiny_dataset(f, labels, 2));
  const Eigen::Index m = d.features.rows();
  for (Eigen::Index j = 0; j < d.features.cols(); ++j) {
    CHECK(std::abs(d.features.col(j).mean()) <= 1e-9);
    const double var = (d.features.col(j).array() - d.features.col(j).mean())
                           .matrix()
                           .squaredNorm() /
                       static_cast<double>(m - 1);
    CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-9);
  }

  // applying the fitted stats again changes nothing beyond roundoff
  const Dataset twice = l2pfs::normalize(d);
  CHECK((twice.features - d.features).norm() <= 1e-9 * std::max(1.0, d.features.norm()));
}

TEST_CASE("apply_normalization reuses fitted statistics without refitting") {
  std::mt19937_64 rng(22);
  const Matrix train = oracles::random_matrix(rng, 8, 3);
  const Dataset fitted = l2pfs::normalize(tiny_dataset(train, oracles::round_robin_labels(8, 2), 2));
  const Matrix test = oracles::random_matrix(rng, 5, 3);
  const Dataset mapped =
      l2pfs::apply_normalization(tiny_dataset(test, oracles::round_robin_labels(5, 2), 2),
                                 *fitted.normalization);
  for (Eigen::Index j = 0; j < 3; ++j) {
    for (Eigen::Index i = 0; i < 5; ++i) {
      const double want =
          (test(i, j) - fitted.normalization->mean(j)) / fitted.normalization->stddev(j);
      CHECK(mapped.features(i, j) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("validate_dataset rejects inconsistent inputs") {
  Matrix f = Matrix::Ones(3, 2);
  CHECK_NOTHROW(l2pfs::validate_dataset(tiny_dataset(f, {1, 2, 1}, 2)));
  CHECK_THROWS_AS(l2pfs::validate_dataset(tiny_dataset(f, {1, 2}, 2)), std::invalid_argument);
  CHECK_THROWS_AS(l2pfs::validate_dataset(tiny_dataset(f, {1, 3, 1}, 2)), std::invalid_argument);
  CHECK_THROWS_AS(l2pfs::validate_dataset(tiny_dataset(f, {1, 1, 1}, 2)), std::invalid_argument);
  Matrix bad = f;
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(l2pfs::validate_dataset(tiny_dataset(bad, {1, 2, 1}, 2)), std::invalid_argument);
}

TEST_CASE("build_solution_space identity toy collapses to the particular solution") {
  const Matrix x = Matrix::Identity(3, 3);
  const LabelMatrix y = l2pfs::build_label_matrix({1, 2, 1}, 2);
  const SolutionSpace s = l2pfs::build_solution_space(x, y);
  CHECK(s.m0 == 3);
  CHECK(s.n0 == 0);
  CHECK(s.P.rows() == 3);
  CHECK(s.P.cols() == 0);
  CHECK((s.Q - y.values).norm() <= 1e-12);
  CHECK((s.L - Matrix::Identity(3, 3)).norm() <= 1e-12);
  const Matrix w = l2pfs::assemble_weights(s, Matrix::Zero(0, 2), Matrix::Zero(3, 2));
  CHECK((w - y.values).norm() <= 1e-12);
}

TEST_CASE("build_solution_space frozen wide example") {
  Matrix x(2, 3);
  x << 1, 0, 2, 0, 1, 3;
  const LabelMatrix y = l2pfs::build_label_matrix({1, 2}, 2);
  const SolutionSpace s = l2pfs::build_solution_space(x, y);
  CHECK(s.m0 == 2);
  CHECK(s.n0 == 1);
  REQUIRE(s.M.rows() == 2);
  REQUIRE(s.M.cols() == 1);
  CHECK(s.M(0, 0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(s.M(1, 0) == doctest::Approx(-3.0).epsilon(1e-12));
  REQUIRE(s.P.rows() == 3);
  REQUIRE(s.P.cols() == 1);
  CHECK(s.P(0, 0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(s.P(1, 0) == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(s.P(2, 0) == doctest::Approx(1.0).epsilon(1e-12));
  // the defining property of P: columns span the null space of x
  CHECK((x * s.P).norm() <= 1e-12);
  REQUIRE(s.pivot_columns.size() == 2);
  CHECK(s.pivot_columns[0] == 0);
  CHECK(s.pivot_columns[1] == 1);
  REQUIRE(s.free_columns.size() == 1);
  CHECK(s.free_columns[0] == 2);
}

TEST_CASE("assembled weights satisfy the projected system for random draws") {
  std::mt19937_64 rng(23);
  const Matrix x = oracles::random_matrix(rng, 10, 25);
  const Matrix xplus = l2pfs::pseudo_inverse(x);
  const LabelMatrix y = l2pfs::build_label_matrix(oracles::round_robin_labels(10, 2), 2);
  const SolutionSpace s = l2pfs::build_solution_space(x, y);
  CHECK(s.m0 == 10);
  CHECK(s.n0 == 15);
  for (int draw = 0; draw < 5; ++draw) {
    const Matrix u = oracles::random_matrix(rng, s.n0, 2);
    const Matrix e = oracles::random_matrix(rng, 10, 2).cwiseAbs();
    const Matrix w = l2pfs::assemble_weights(s, u, e);
    const Matrix rhs = x * xplus * (y.values + e);
    CHECK((x * w - rhs).norm() <= 1e-8 * std::max(1.0, rhs.norm()));
  }
}

TEST_CASE("every solution of the projected system is reachable") {
  std::mt19937_64 rng(24);
  const Matrix x = oracles::random_matrix(rng, 6, 11);
  const Matrix xplus = l2pfs::pseudo_inverse(x);
  const LabelMatrix y = l2pfs::build_label_matrix(oracles::round_robin_labels(6, 2), 2);
  const SolutionSpace s = l2pfs::build_solution_space(x, y);
  const Matrix e = oracles::random_matrix(rng, 6, 2);

  // one particular solution plus a random null-space shift
  const Matrix w0 = xplus * (y.values + e) +
                    (Matrix::Identity(11, 11) - xplus * x) * oracles::random_matrix(rng, 11, 2);
  CHECK((x * w0 - x * xplus * (y.values + e)).norm() <= 1e-9 * std::max(1.0, w0.norm()));

  // recover u by least squares against the parameterization
  Matrix base = s.Q;
  for (Eigen::Index i = 0; i < s.m0; ++i) {
    base.row(s.pivot_columns[i]) += s.L.row(i) * e;
  }
  const Matrix u = s.P.completeOrthogonalDecomposition().solve(w0 - base);
  const Matrix rebuilt = l2pfs::assemble_weights(s, u, e);
  CHECK((rebuilt - w0).norm() <= 1e-8 * std::max(1.0, w0.norm()));
}

TEST_CASE("full column rank leaves no free directions") {
  std::mt19937_64 rng(25);
  const Matrix x = oracles::random_matrix(rng, 7, 4);
  const LabelMatrix y = l2pfs::build_label_matrix(oracles::round_robin_labels(7, 2), 2);
  const SolutionSpace s = l2pfs::build_solution_space(x, y);
  CHECK(s.m0 == 4);
  CHECK(s.n0 == 0);
  CHECK(s.P.cols() == 0);
  CHECK(s.free_columns.empty());
  const Matrix w = l2pfs::assemble_weights(s, Matrix::Zero(0, 2), Matrix::Zero(7, 2));
  const Matrix xplus = l2pfs::pseudo_inverse(x);
  CHECK((x * w - x * xplus * y.values).norm() <= 1e-9 * std::max(1.0, y.values.norm()));
}

TEST_CASE("pivot and free columns partition the column index range") {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::Index m = 3 + static_cast<Eigen::Index>(rng() % 4);
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng() % 8);
    Matrix x = oracles::random_matrix(rng, m, n);
    if (trial % 2 == 0 && m >= 2) x.row(0) = x.row(m - 1);
    const LabelMatrix y =
        l2pfs::build_label_matrix(oracles::round_robin_labels(static_cast<int>(m), 2), 2);
    const SolutionSpace s = l2pfs::build_solution_space(x, y);
    std::set<Eigen::Index> seen;
    for (Eigen::Index c : s.pivot_columns) seen.insert(c);
    for (Eigen::Index c : s.free_columns) seen.insert(c);
    CHECK(static_cast<Eigen::Index>(seen.size()) == n);
    CHECK(static_cast<Eigen::Index>(s.pivot_columns.size()) == s.m0);
    CHECK(static_cast<Eigen::Index>(s.free_columns.size()) == s.n0);
    CHECK(std::is_sorted(s.pivot_columns.begin(), s.pivot_columns.end()));
    CHECK(std::is_sorted(s.free_columns.begin(), s.free_columns.end()));
    CHECK((x * s.P).norm() <= 1e-9 * std::max(1.0, x.norm()));
  }
}

TEST_CASE("build_solution_space rejects rank-zero designs") {
  const LabelMatrix y = l2pfs::build_label_matrix({1, 2}, 2);
  CHECK_THROWS_AS(l2pfs::build_solution_space(Matrix::Zero(2, 3), y), std::invalid_argument);
}

}  // TEST_SUITE

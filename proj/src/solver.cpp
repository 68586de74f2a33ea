#include "l2pfs/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace l2pfs {

namespace {

void check_config(const SolverConfig& config) {
  if (!(config.p > 0.0 && config.p <= 2.0)) {
    throw std::invalid_argument("solver: p must lie in (0, 2]");
  }
  if (config.max_outer_iterations < 1) {
    throw std::invalid_argument("solver: need at least one iteration");
  }
  if (!(config.relative_objective_tolerance > 0.0)) {
    throw std::invalid_argument("solver: tolerance must be positive");
  }
  if (!(config.weight_floor > 0.0)) {
    throw std::invalid_argument("solver: weight floor must be positive");
  }
}

// Per-row floored value: ||row||^p above the floor, the tangent quadratic
// cap below it. Increasing in the floor and concave in the squared norm,
// which is what makes the reweighted steps monotone on the traced value.
double floored_row_value(double t, double p, double eps) {
  if (t >= eps) return std::pow(t, p);
  return 0.5 * p * std::pow(eps, p - 2.0) * t * t + (1.0 - 0.5 * p) * std::pow(eps, p);
}

// Floored l2,p value of the candidate whose pivot rows are v and free rows
// are u (the post-U-step iterate, E still pending).
double l2p_of_blocks(const Matrix& v, const Matrix& u, double p, double eps) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    acc += floored_row_value(v.row(i).norm(), p, eps);
  }
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    acc += floored_row_value(u.row(i).norm(), p, eps);
  }
  return acc > 0.0 ? std::pow(acc, 1.0 / p) : 0.0;
}

// Weighted quadratic the U-step minimizes, used by the acceptance safeguard.
double ustep_objective(const SolutionSpace& space, const IterationScratch& scratch,
                       const Matrix& u) {
  const double fit =
      (scratch.s1.cwiseSqrt().asDiagonal() * (space.M * u + scratch.k_mat)).squaredNorm();
  const double reg = (scratch.s2.cwiseSqrt().asDiagonal() * u).squaredNorm();
  return fit + reg;
}

}  // namespace

double floored_l2p_value(const Matrix& w, double p, double floor_eps) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    acc += floored_row_value(w.row(i).norm(), p, floor_eps);
  }
  return acc > 0.0 ? std::pow(acc, 1.0 / p) : 0.0;
}

Vector reweighting_diagonal(const Matrix& a, double p, double floor_eps) {
  if (!(floor_eps > 0.0)) {
    throw std::invalid_argument("reweighting_diagonal: floor must be positive");
  }
  Vector d(a.rows());
  const double expo = 1.0 - p / 2.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    d(i) = 1.0 / std::pow(std::max(a.row(i).norm(), floor_eps), expo);
  }
  return d;
}

void prepare_iteration(const SolutionSpace& space, const Vector& sigma_diag,
                       const Matrix& e, IterationScratch& scratch) {
  const Eigen::Index n = space.P.rows();
  if (sigma_diag.size() != n) {
    throw std::invalid_argument("prepare_iteration: sigma has wrong length");
  }
  scratch.s = sigma_diag.cwiseProduct(sigma_diag);
  scratch.s1.resize(space.m0);
  scratch.s2.resize(space.n0);
  for (Eigen::Index j = 0; j < space.m0; ++j) {
    scratch.s1(j) = scratch.s(space.pivot_columns[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index i = 0; i < space.n0; ++i) {
    scratch.s2(i) = scratch.s(space.free_columns[static_cast<std::size_t>(i)]);
  }
  scratch.k_mat = space.N + space.L * e;
  scratch.g = Matrix::Zero(n, space.N.cols());
  for (Eigen::Index j = 0; j < space.m0; ++j) {
    scratch.g.row(space.pivot_columns[static_cast<std::size_t>(j)]) = scratch.k_mat.row(j);
  }
}

Matrix u_step(const SolutionSpace& space, IterationScratch& scratch) {
  const Eigen::Index c = space.N.cols();
  if (space.n0 == 0) {
    return Matrix(0, c);
  }
  const Matrix& m = space.M;
  const Vector& s1 = scratch.s1;
  const Vector& s2 = scratch.s2;
  const Matrix& k = scratch.k_mat;

  // The reduced route forms products whose conditioning scales with the
  // squared-weight spread times ||M||_F^2; past ~1e8 its forward error is
  // no longer acceptable even when residuals look small, so the stacked
  // factorization below takes over.
  const double spread =
      scratch.s.size() > 0
          ? scratch.s.maxCoeff() / std::max(scratch.s.minCoeff(), 1e-300)
          : 1.0;
  const bool benign = spread * std::max(1.0, m.squaredNorm()) <= 1e8;

  if (space.m0 < space.n0 && benign) {
    // Reduced route: U = -T (M T + I)^{-1} K with T = S2^{-1} M^T S1.
    // The m0 x m0 solve replaces the n0 x n0 normal equations.
    scratch.t = s2.cwiseInverse().asDiagonal() * m.transpose() * s1.asDiagonal();
    const Matrix lhs = m * scratch.t + Matrix::Identity(space.m0, space.m0);
    bool ok = true;
    try {
      scratch.c_mat = solve_linear(lhs, k, 1e-15);
      const double rel = (lhs * scratch.c_mat - k).norm() / (1.0 + k.norm());
      ok = scratch.c_mat.allFinite() && rel <= 1e-8;
    } catch (const std::runtime_error&) {
      ok = false;
    }
    if (ok) {
      return -scratch.t * scratch.c_mat;
    }
  }

  // Stacked least squares on [S1^1/2 M; S2^1/2] against [-S1^1/2 K; 0]:
  // the same minimizer as the weighted normal equations, but the condition
  // number enters unsquared, which is what survives spreads near 1/floor.
  Matrix a(space.m0 + space.n0, space.n0);
  a.topRows(space.m0) = s1.cwiseSqrt().asDiagonal() * m;
  a.bottomRows(space.n0) = Matrix(s2.cwiseSqrt().asDiagonal());
  Matrix b = Matrix::Zero(space.m0 + space.n0, c);
  b.topRows(space.m0) = -(s1.cwiseSqrt().asDiagonal() * k);
  const Matrix u = a.colPivHouseholderQr().solve(b);
  if (!u.allFinite()) {
    throw std::runtime_error("u_step: weighted least-squares solve produced non-finite values");
  }
  return u;
}

FeatureRanking rank_features(const Matrix& w, int d) {
  const Eigen::Index n = w.rows();
  if (n < 2) {
    throw std::invalid_argument("rank_features: need at least one feature row plus bias");
  }
  const int feature_count = static_cast<int>(n) - 1;
  if (d < 1 || d > feature_count) {
    throw std::invalid_argument("rank_features: d must lie in 1.." +
                                std::to_string(feature_count));
  }
  FeatureRanking r;
  r.row_norms.resize(static_cast<std::size_t>(feature_count));
  for (int i = 0; i < feature_count; ++i) {
    r.row_norms[static_cast<std::size_t>(i)] = w.row(i).norm();
  }
  r.order.resize(static_cast<std::size_t>(feature_count));
  std::iota(r.order.begin(), r.order.end(), 1);
  std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) {
    const double na = r.row_norms[static_cast<std::size_t>(a - 1)];
    const double nb = r.row_norms[static_cast<std::size_t>(b - 1)];
    if (na != nb) return na > nb;
    return a < b;
  });
  r.selected.assign(r.order.begin(), r.order.begin() + d);
  return r;
}

std::pair<SolverState, FeatureRanking> run(const Dataset& dataset, const SolverConfig& config,
                                           const IterationObserver& observer) {
  validate_dataset(dataset);
  if (config.feature_count_d > dataset.features.cols()) {
    throw std::invalid_argument("run: d exceeds the feature count");
  }
  const Matrix x = absorb_bias(dataset.features);
  const LabelMatrix y = build_label_matrix(dataset.labels, dataset.class_count);
  const SolutionSpace space = build_solution_space(x, y);
  return run_on_space(space, y, config, observer);
}

std::pair<SolverState, FeatureRanking> run_on_space(const SolutionSpace& space,
                                                    const LabelMatrix& y,
                                                    const SolverConfig& config,
                                                    const IterationObserver& observer) {
  check_config(config);
  const Eigen::Index n = space.P.rows();
  const Eigen::Index m = space.L.cols();
  const Eigen::Index c = space.N.cols();
  if (y.values.rows() != m || y.values.cols() != c) {
    throw std::invalid_argument("run_on_space: label matrix does not match the space");
  }
  if (config.feature_count_d < 1 || config.feature_count_d > static_cast<int>(n) - 1) {
    throw std::invalid_argument("run_on_space: d must lie in 1.." + std::to_string(n - 1));
  }

  SolverState st;
  st.e = Matrix::Zero(m, c);
  st.u = Matrix::Zero(space.n0, c);
  st.sigma_diag = Vector::Ones(n);
  IterationScratch scratch;

  // Progressive mode opens with the floor at the data scale (the affine
  // offset rows bound the first iterate's row norms), then halves it each
  // time the objective settles at the current level. At a high floor every
  // row is clamped, the weighted problem is essentially ridge-like, and
  // the iterate tracks the relaxation down to the configured floor.
  double eps_now = config.weight_floor;
  if (config.progressive_floor) {
    double top = 0.0;
    for (Eigen::Index i = 0; i < space.N.rows(); ++i) {
      top = std::max(top, space.N.row(i).norm());
    }
    eps_now = std::min(std::max(top, config.weight_floor), 1e6);
  }
  st.working_floor = eps_now;

  double prev_obj = -1.0;
  Matrix u_prev;
  for (int k = 0; k < config.max_outer_iterations; ++k) {
    prepare_iteration(space, st.sigma_diag, st.e, scratch);
    Matrix u_new = u_step(space, scratch);
    // Keep the previous U when it scores better under the current weights;
    // the trace then cannot rise through this half-step.
    if (u_prev.size() != 0 &&
        ustep_objective(space, scratch, u_prev) < ustep_objective(space, scratch, u_new)) {
      u_new = u_prev;
    }

    scratch.h = space.M * u_new + space.N;
    scratch.v = scratch.h + space.L * st.e;
    st.ustep_objective_trace.push_back(l2p_of_blocks(scratch.v, u_new, config.p, eps_now));

    scratch.lambda_diag = reweighting_diagonal(scratch.v, config.p, eps_now);
    int exhausted = 0;
    Matrix e_new = solve_e_step(scratch.lambda_diag, space.L, scratch.h, y,
                                config.nnls_max_iterations, config.nnls_tolerance, &exhausted);
    // Per column, keep the incoming slack if the fresh solve scores worse;
    // a budget-cut NNLS start can otherwise lose to the warm incumbent.
    for (Eigen::Index j = 0; j < c; ++j) {
      const double fresh =
          (scratch.lambda_diag.asDiagonal() * (space.L * e_new.col(j) + scratch.h.col(j)))
              .squaredNorm();
      const double kept =
          (scratch.lambda_diag.asDiagonal() * (space.L * st.e.col(j) + scratch.h.col(j)))
              .squaredNorm();
      if (kept < fresh) {
        e_new.col(j) = st.e.col(j);
      }
    }

    st.u = u_new;
    st.e = std::move(e_new);
    st.w = assemble_weights(space, st.u, st.e);
    u_prev = st.u;
    st.sigma_diag = reweighting_diagonal(st.w, config.p, eps_now);
    st.working_floor = eps_now;
    const double obj = floored_l2p_value(st.w, config.p, eps_now);
    st.objective_trace.push_back(obj);
    st.iteration = k + 1;
    if (observer) {
      observer(st, scratch);
    }
    if (prev_obj >= 0.0) {
      const double denom = prev_obj > 0.0 ? prev_obj : 1.0;
      const double rel = std::abs(obj - prev_obj) / denom;
      if (eps_now > config.weight_floor) {
        if (rel <= config.relative_objective_tolerance) {
          // Level settled: halve the floor and rebase the settle test on
          // the new level's value. Sigma refreshes on the next pass.
          eps_now = std::max(config.weight_floor, 0.5 * eps_now);
          prev_obj = floored_l2p_value(st.w, config.p, eps_now);
          continue;
        }
      } else if (rel <= config.relative_objective_tolerance) {
        st.converged = true;
        break;
      }
    }
    prev_obj = obj;
  }

  FeatureRanking ranking = rank_features(st.w, config.feature_count_d);
  return {std::move(st), std::move(ranking)};
}

std::vector<SweepEntry> sweep_p(const Dataset& dataset, const std::vector<double>& p_grid,
                                const SolverConfig& base) {
  if (p_grid.empty()) {
    throw std::invalid_argument("sweep_p: empty grid");
  }
  std::vector<SweepEntry> out;
  out.reserve(p_grid.size());
  for (double p : p_grid) {
    SweepEntry entry;
    entry.p = p;
    SolverConfig cfg = base;
    cfg.p = p;
    try {
      auto [state, ranking] = run(dataset, cfg);
      entry.state = std::move(state);
      entry.ranking = std::move(ranking);
      entry.ok = true;
    } catch (const std::exception& ex) {
      entry.error = ex.what();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace l2pfs

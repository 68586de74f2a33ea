#pragma once

#include "l2pfs/matrix.hpp"
#include "l2pfs/nnls.hpp"
#include "l2pfs/solution_space.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace l2pfs {

struct SolverConfig {
  double p = 1.0;                              // row-sparsity exponent, (0, 2]
  int max_outer_iterations = 200;
  double relative_objective_tolerance = 1e-6;  // stop on relative change
  double weight_floor = 1e-8;                  // row norms clamped from below
  int feature_count_d = 10;                    // selection size
  int nnls_max_iterations = 0;                 // 0 = per-problem default
  double nnls_tolerance = 1e-10;
  // Quality mode: start the row-norm floor at the data scale and halve it
  // each time the objective settles, ending at weight_floor. Slower but
  // tracks the convex relaxation closely; pair with a large iteration
  // budget and a tight tolerance.
  bool progressive_floor = false;
};

struct SolverState {
  Matrix u;           // n0 x c
  Matrix e;           // m x c, slack with Y (.) E >= 0
  Matrix w;           // n x c, assembled weights
  Vector sigma_diag;  // n, current reweighting diagonal
  std::vector<double> objective_trace;        // after each full iteration
  std::vector<double> ustep_objective_trace;  // after the U update, E still old
  int iteration = 0;
  bool converged = false;
  double working_floor = 0.0;  // floor in effect at the last iterate
};

// Intermediates of one iteration, exposed for tests and observers.
struct IterationScratch {
  Matrix g;           // n x c, Q + scatter(L E)
  Matrix h;           // m0 x c, M U_new + N
  Matrix k_mat;       // m0 x c, N + L E (pivot rows of g)
  Matrix v;           // m0 x c, pivot rows after the U update
  Vector lambda_diag; // m0, E-step weights from v
  Vector s;           // n, sigma_diag squared
  Vector s1;          // m0, pivot partition of s
  Vector s2;          // n0, free partition of s
  Matrix t;           // n0 x m0, reduced-route factor (m0 < n0 only)
  Matrix c_mat;       // m0 x c, reduced-route solve (m0 < n0 only)
};

struct FeatureRanking {
  std::vector<double> row_norms;  // [i] = ||row i+1||_2, bias row excluded
  std::vector<int> order;         // 1-based ids, descending norm, ties by index
  std::vector<int> selected;      // first d of order
};

using IterationObserver = std::function<void(const SolverState&, const IterationScratch&)>;

// 1 / max(||row i||_2, floor_eps)^(1 - p/2), one entry per row of a.
Vector reweighting_diagonal(const Matrix& a, double p, double floor_eps);

// Fills s, s1, s2, k_mat, g from the current iterate.
void prepare_iteration(const SolutionSpace& space, const Vector& sigma_diag,
                       const Matrix& e, IterationScratch& scratch);

// Minimizer of ||diag(sigma) (P U + G)||_F^2 over U. Uses the reduced
// solve through T = S2^-1 M^T S1 when m0 < n0 and the weight spread is
// benign; otherwise a stacked least-squares factorization, which keeps
// full accuracy when the squared weights span many orders of magnitude.
// Reads s1, s2, k_mat; fills t, c_mat on the reduced route.
Matrix u_step(const SolutionSpace& space, IterationScratch& scratch);

// Floored l2,p value: rows below the floor contribute the tight smooth
// quadratic cap instead of ||row||^p, so the value is finite-curvature
// everywhere yet equals the raw norm once every row clears the floor.
// This is the quantity the objective traces store.
double floored_l2p_value(const Matrix& w, double p, double floor_eps);

// Ranks rows of w by Euclidean norm, descending, ties broken by ascending
// index. The last row (bias) is excluded. Feature ids are 1-based.
FeatureRanking rank_features(const Matrix& w, int d);

// Alternating minimization: analytic U update, nonnegative E update,
// reweighting from the assembled rows. Starts from E = 0 and sigma = 1.
// Either half-step is kept only if it does not increase its own weighted
// objective, so the recorded traces never rise. The observer, if set,
// runs after every full iteration.
std::pair<SolverState, FeatureRanking> run(const Dataset& dataset,
                                           const SolverConfig& config,
                                           const IterationObserver& observer = {});

// Same loop on a prebuilt space; assumes the last row of W is the bias.
std::pair<SolverState, FeatureRanking> run_on_space(const SolutionSpace& space,
                                                    const LabelMatrix& y,
                                                    const SolverConfig& config,
                                                    const IterationObserver& observer = {});

struct SweepEntry {
  double p = 0.0;
  bool ok = false;
  std::string error;
  SolverState state;
  FeatureRanking ranking;
};

// Runs once per p on identical data. Failures are captured per entry, not
// thrown.
std::vector<SweepEntry> sweep_p(const Dataset& dataset,
                                const std::vector<double>& p_grid,
                                const SolverConfig& base);

}  // namespace l2pfs

#pragma once

#include "l2pfs/data_io.hpp"
#include "l2pfs/solver.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace l2pfs {

// Synthetic classification task: informative columns carry an additive
// class-dependent offset, everything else is pure noise.
struct PlantedSpec {
  int samples = 0;
  int features = 0;
  int classes = 2;
  std::vector<int> informative;  // 1-based feature ids
  double class_separation = 1.0; // offset spread between adjacent classes
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

// Returns the dataset and the planted feature ids (sorted). Classes are
// assigned round-robin so every class appears. Deterministic per seed.
std::pair<Dataset, std::vector<int>> generate_planted(const PlantedSpec& spec);

// Ridge one-vs-rest least squares on the selected columns plus a bias.
struct LinearModel {
  Matrix weights;                // (k+1) x c, last row is the bias
  std::vector<int> feature_ids;  // 1-based columns the model consumes
  int class_count = 0;
};

LinearModel simple_classifier_fit(const Dataset& train, const std::vector<int>& selected,
                                  double ridge);

// Argmax of the scores; exact ties resolve to the lowest class id.
std::vector<int> classify(const LinearModel& model, const Matrix& features);

double classification_accuracy(const LinearModel& model, const Dataset& dataset);

struct CrossValidationReport {
  double best_p = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_accuracy;  // aligned with grid
};

// Stratified k-fold selection of p: runs the solver per fold and p, scores
// a ridge classifier on the held-out fold, picks the best mean accuracy.
// Ties resolve toward the larger p. Fold assignment is seeded.
CrossValidationReport cross_validate_p(const Dataset& train, const std::vector<double>& p_grid,
                                       int folds, const SolverConfig& config,
                                       std::uint64_t seed, double ridge = 1.0);

struct RecoveryMetrics {
  double precision_at_d = 0.0;
  int support_size = 0;  // rows with norm > 1e-6 * max norm
};

RecoveryMetrics recovery_metrics(const FeatureRanking& ranking, const std::vector<int>& truth,
                                 int d);

}  // namespace l2pfs

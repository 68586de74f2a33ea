#include "l2pfs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

namespace l2pfs {

namespace {

Matrix selected_design(const Matrix& features, const std::vector<int>& selected) {
  Matrix z(features.rows(), static_cast<Eigen::Index>(selected.size()) + 1);
  for (std::size_t k = 0; k < selected.size(); ++k) {
    const int id = selected[k];
    if (id < 1 || id > features.cols()) {
      throw std::invalid_argument("classifier: feature id " + std::to_string(id) +
                                  " outside 1.." + std::to_string(features.cols()));
    }
    z.col(static_cast<Eigen::Index>(k)) = features.col(id - 1);
  }
  z.col(static_cast<Eigen::Index>(selected.size())).setOnes();
  return z;
}

}  // namespace

std::pair<Dataset, std::vector<int>> generate_planted(const PlantedSpec& spec) {
  if (spec.samples < 2 || spec.features < 1) {
    throw std::invalid_argument("generate_planted: need at least 2 samples and 1 feature");
  }
  if (spec.classes < 2) {
    throw std::invalid_argument("generate_planted: need at least two classes");
  }
  if (spec.samples < spec.classes) {
    throw std::invalid_argument("generate_planted: fewer samples than classes");
  }
  if (spec.informative.empty()) {
    throw std::invalid_argument("generate_planted: no informative features");
  }
  if (!(spec.noise_std >= 0.0)) {
    throw std::invalid_argument("generate_planted: negative noise level");
  }
  std::set<int> planted;
  for (int id : spec.informative) {
    if (id < 1 || id > spec.features) {
      throw std::invalid_argument("generate_planted: informative id " + std::to_string(id) +
                                  " outside 1.." + std::to_string(spec.features));
    }
    if (!planted.insert(id).second) {
      throw std::invalid_argument("generate_planted: duplicate informative id " +
                                  std::to_string(id));
    }
  }

  Dataset out;
  out.features.resize(spec.samples, spec.features);
  out.labels.resize(static_cast<std::size_t>(spec.samples));
  out.class_count = spec.classes;
  out.class_names.reserve(static_cast<std::size_t>(spec.classes));
  for (int c = 1; c <= spec.classes; ++c) {
    out.class_names.push_back(std::to_string(c));
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Eigen::Index i = 0; i < spec.samples; ++i) {
    const int label = static_cast<int>(i % spec.classes) + 1;  // round-robin keeps classes balanced
    out.labels[static_cast<std::size_t>(i)] = label;
    // Class offsets are centered: class j sits at separation * (j - (c+1)/2).
    const double offset =
        spec.class_separation * (static_cast<double>(label) - (spec.classes + 1) / 2.0);
    for (Eigen::Index j = 0; j < spec.features; ++j) {
      double v = spec.noise_std * noise(rng);
      if (planted.count(static_cast<int>(j) + 1)) {
        v += offset;
      }
      out.features(i, j) = v;
    }
  }
  std::vector<int> truth(planted.begin(), planted.end());
  return {std::move(out), std::move(truth)};
}

LinearModel simple_classifier_fit(const Dataset& train, const std::vector<int>& selected,
                                  double ridge) {
  validate_dataset(train);
  if (selected.empty()) {
    throw std::invalid_argument("classifier: empty feature selection");
  }
  if (!(ridge >= 0.0)) {
    throw std::invalid_argument("classifier: negative ridge");
  }
  const Matrix z = selected_design(train.features, selected);
  const LabelMatrix y = build_label_matrix(train.labels, train.class_count);
  Matrix gram = z.transpose() * z;
  gram.diagonal().array() += ridge;
  const Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("classifier: normal equations are not solvable");
  }
  LinearModel model;
  model.weights = ldlt.solve(z.transpose() * y.values);
  if (!model.weights.allFinite()) {
    throw std::runtime_error("classifier: non-finite weights; increase the ridge");
  }
  model.feature_ids = selected;
  model.class_count = train.class_count;
  return model;
}

std::vector<int> classify(const LinearModel& model, const Matrix& features) {
  const Matrix z = selected_design(features, model.feature_ids);
  const Matrix scores = z * model.weights;
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    // Strict comparison keeps the lowest class id on exact score ties.
    int best = 1;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best - 1)) {
        best = static_cast<int>(c) + 1;
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

double classification_accuracy(const LinearModel& model, const Dataset& dataset) {
  if (dataset.features.rows() == 0) {
    throw std::invalid_argument("accuracy: empty dataset");
  }
  const std::vector<int> predicted = classify(model, dataset.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == dataset.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

CrossValidationReport cross_validate_p(const Dataset& train, const std::vector<double>& p_grid,
                                       int folds, const SolverConfig& config,
                                       std::uint64_t seed, double ridge) {
  validate_dataset(train);
  if (folds < 2) {
    throw std::invalid_argument("cross_validate_p: need at least two folds");
  }
  if (p_grid.empty()) {
    throw std::invalid_argument("cross_validate_p: empty grid");
  }
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(train.class_count));
  for (Eigen::Index i = 0; i < train.features.rows(); ++i) {
    by_class[static_cast<std::size_t>(train.labels[static_cast<std::size_t>(i)] - 1)].push_back(i);
  }
  for (int c = 0; c < train.class_count; ++c) {
    if (by_class[static_cast<std::size_t>(c)].size() < static_cast<std::size_t>(folds)) {
      throw std::invalid_argument("cross_validate_p: class " + std::to_string(c + 1) +
                                  " has fewer samples than folds");
    }
  }

  // Stratified fold assignment: shuffle within each class, deal round-robin.
  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(static_cast<std::size_t>(train.features.rows()), 0);
  for (int c = 0; c < train.class_count; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    for (std::size_t i = members.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(members[i - 1], members[j]);
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      fold_of[static_cast<std::size_t>(members[i])] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }
  }

  CrossValidationReport report;
  report.grid = p_grid;
  report.mean_accuracy.assign(p_grid.size(), 0.0);
  for (std::size_t gi = 0; gi < p_grid.size(); ++gi) {
    SolverConfig cfg = config;
    cfg.p = p_grid[gi];
    double acc_sum = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<Eigen::Index> fit_rows;
      std::vector<Eigen::Index> val_rows;
      for (Eigen::Index i = 0; i < train.features.rows(); ++i) {
        if (fold_of[static_cast<std::size_t>(i)] == f) {
          val_rows.push_back(i);
        } else {
          fit_rows.push_back(i);
        }
      }
      Dataset fit_part;
      fit_part.features.resize(static_cast<Eigen::Index>(fit_rows.size()), train.features.cols());
      for (std::size_t i = 0; i < fit_rows.size(); ++i) {
        fit_part.features.row(static_cast<Eigen::Index>(i)) = train.features.row(fit_rows[i]);
        fit_part.labels.push_back(train.labels[static_cast<std::size_t>(fit_rows[i])]);
      }
      fit_part.class_count = train.class_count;
      fit_part.class_names = train.class_names;
      Dataset val_part;
      val_part.features.resize(static_cast<Eigen::Index>(val_rows.size()), train.features.cols());
      for (std::size_t i = 0; i < val_rows.size(); ++i) {
        val_part.features.row(static_cast<Eigen::Index>(i)) = train.features.row(val_rows[i]);
        val_part.labels.push_back(train.labels[static_cast<std::size_t>(val_rows[i])]);
      }
      val_part.class_count = train.class_count;
      val_part.class_names = train.class_names;

      const auto [state, ranking] = run(fit_part, cfg);
      const LinearModel model = simple_classifier_fit(fit_part, ranking.selected, ridge);
      acc_sum += classification_accuracy(model, val_part);
    }
    report.mean_accuracy[gi] = acc_sum / folds;
  }

  // Best mean accuracy; ties resolve toward the larger p.
  std::size_t best = 0;
  for (std::size_t gi = 1; gi < p_grid.size(); ++gi) {
    const bool better = report.mean_accuracy[gi] > report.mean_accuracy[best];
    const bool tie_larger_p = report.mean_accuracy[gi] == report.mean_accuracy[best] &&
                              p_grid[gi] > p_grid[best];
    if (better || tie_larger_p) {
      best = gi;
    }
  }
  report.best_p = p_grid[best];
  return report;
}

RecoveryMetrics recovery_metrics(const FeatureRanking& ranking, const std::vector<int>& truth,
                                 int d) {
  if (d < 1 || d > static_cast<int>(ranking.order.size())) {
    throw std::invalid_argument("recovery_metrics: d outside the ranking size");
  }
  const std::set<int> truth_set(truth.begin(), truth.end());
  int hits = 0;
  for (int i = 0; i < d; ++i) {
    if (truth_set.count(ranking.order[static_cast<std::size_t>(i)])) {
      ++hits;
    }
  }
  RecoveryMetrics metrics;
  metrics.precision_at_d = static_cast<double>(hits) / static_cast<double>(d);
  const double max_norm =
      ranking.row_norms.empty()
          ? 0.0
          : *std::max_element(ranking.row_norms.begin(), ranking.row_norms.end());
  const double threshold = 1e-6 * max_norm;
  for (double norm : ranking.row_norms) {
    if (norm > threshold) {
      ++metrics.support_size;
    }
  }
  return metrics;
}

}  // namespace l2pfs

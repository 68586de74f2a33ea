#pragma once

#include "l2pfs/solution_space.hpp"
#include "l2pfs/solver.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace l2pfs {

struct SplitSpec {
  double train_fraction = 0.6;
  std::uint64_t seed = 0;
  bool stratified = true;
};

// Dense CSV, one sample per row. label_column is 1-based; 0 means the last
// column. Labels may be arbitrary text and are remapped to 1..c in order of
// first appearance. Parse errors carry the row and column.
Dataset read_dense_csv(const std::string& path, bool has_header, int label_column);

// Sparse "label idx:val ..." rows with 1-based, strictly ascending indices
// per row. The feature count is the largest index seen in the file.
Dataset read_sparse_libsvm(const std::string& path);

// Dense CSV writer matching read_dense_csv(path, false, 0): features then
// the label text in the last column.
void write_dense_csv(const Dataset& dataset, const std::string& path);

// Seeded train/test split. When stratified, per-class counts follow
// largest-remainder rounding of train_fraction (every class keeps at least
// one sample on each side). Normalization is fitted on the train part and
// applied to both.
std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec);

// One solver run, serializable: configuration echo, selection, full
// ranking, objective trace, iteration count, convergence flag.
struct ResultRecord {
  SolverConfig config;
  std::vector<int> selected;
  std::vector<int> ranking_features;   // rank order
  std::vector<double> ranking_norms;   // aligned with ranking_features
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
};

ResultRecord make_result_record(const SolverConfig& config, const SolverState& state,
                                const FeatureRanking& ranking);

// Exact bytes write_result produces in JSON mode.
std::string result_to_json(const ResultRecord& record);

// format is "json" or "csv". JSON holds the whole record; CSV holds the
// ranking as "feature,norm" rows with 17-significant-digit norms. Writes
// are atomic (temp file + rename).
void write_result(const ResultRecord& record, const std::string& path,
                  const std::string& format);

ResultRecord read_result_json(const std::string& path);

// Atomic text-file write used by every writer here and in the CLI.
void write_file_atomic(const std::string& path, const std::string& content);

// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits.
std::string file_digest_hex(const std::string& path);

}  // namespace l2pfs

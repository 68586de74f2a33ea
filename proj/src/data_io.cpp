#include "l2pfs/data_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace l2pfs {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& cell, const std::string& path, std::size_t line,
                    std::size_t column) {
  const std::string t = trim(cell);
  double value = 0.0;
  const char* begin = t.data();
  const char* end = begin + t.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || t.empty() || !std::isfinite(value)) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": column " +
                             std::to_string(column) + ": unparseable number '" + cell + "'");
  }
  return value;
}

// Remaps label text to contiguous ids in order of first appearance.
struct LabelMapper {
  std::map<std::string, int> ids;
  std::vector<std::string> names;

  int id_for(const std::string& text) {
    const auto it = ids.find(text);
    if (it != ids.end()) return it->second;
    const int id = static_cast<int>(names.size()) + 1;
    ids.emplace(text, id);
    names.push_back(text);
    return id;
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

// Deterministic Fisher-Yates; avoids std::shuffle's unspecified draw order.
void shuffle_indices(std::vector<Eigen::Index>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

Dataset subset(const Dataset& dataset, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), dataset.features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = dataset.features.row(rows[i]);
    out.labels.push_back(dataset.labels[static_cast<std::size_t>(rows[i])]);
  }
  out.class_count = dataset.class_count;
  out.class_names = dataset.class_names;
  return out;
}

std::string format_17g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json config_to_json(const SolverConfig& config) {
  json j;
  j["p"] = config.p;
  j["max_outer_iterations"] = config.max_outer_iterations;
  j["relative_objective_tolerance"] = config.relative_objective_tolerance;
  j["weight_floor"] = config.weight_floor;
  j["feature_count_d"] = config.feature_count_d;
  return j;
}

SolverConfig config_from_json(const json& j) {
  SolverConfig config;
  config.p = j.at("p").get<double>();
  config.max_outer_iterations = j.at("max_outer_iterations").get<int>();
  config.relative_objective_tolerance = j.at("relative_objective_tolerance").get<double>();
  config.weight_floor = j.at("weight_floor").get<double>();
  config.feature_count_d = j.at("feature_count_d").get<int>();
  return config;
}

}  // namespace

Dataset read_dense_csv(const std::string& path, bool has_header, int label_column) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error(path + ": cannot open file");
  }
  Dataset out;
  LabelMapper mapper;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (has_header && lineno == 1) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() < 2) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": need at least one feature and a label");
    }
    if (width == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(width) + " columns, found " +
                               std::to_string(cells.size()));
    }
    const std::size_t label_idx =
        label_column == 0 ? width - 1 : static_cast<std::size_t>(label_column - 1);
    if (label_idx >= width) {
      throw std::runtime_error(path + ": label column " + std::to_string(label_column) +
                               " outside 1.." + std::to_string(width));
    }
    std::vector<double> feats;
    feats.reserve(width - 1);
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_idx) continue;
      feats.push_back(parse_double(cells[c], path, lineno, c + 1));
    }
    const std::string label_text = trim(cells[label_idx]);
    if (label_text.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty label");
    }
    labels.push_back(mapper.id_for(label_text));
    rows.push_back(std::move(feats));
  }
  if (rows.empty()) {
    throw std::runtime_error(path + ": no data rows");
  }
  if (mapper.names.size() < 2) {
    throw std::runtime_error(path + ": need at least two distinct classes");
  }
  out.features.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  out.labels = std::move(labels);
  out.class_count = static_cast<int>(mapper.names.size());
  out.class_names = std::move(mapper.names);
  return out;
}

Dataset read_sparse_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error(path + ": cannot open file");
  }
  LabelMapper mapper;
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<int> labels;
  int max_index = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::istringstream tokens(t);
    std::string label_text;
    tokens >> label_text;
    labels.push_back(mapper.id_for(label_text));
    std::vector<std::pair<int, double>> entries;
    std::string pair_text;
    int prev_index = 0;
    while (tokens >> pair_text) {
      const std::size_t colon = pair_text.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 >= pair_text.size()) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": malformed entry '" + pair_text + "'");
      }
      int index = 0;
      {
        const char* begin = pair_text.data();
        const char* end = begin + colon;
        const auto [ptr, ec] = std::from_chars(begin, end, index);
        if (ec != std::errc() || ptr != end) {
          throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                   ": bad feature index in '" + pair_text + "'");
        }
      }
      if (index < 1) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": feature index must be positive, got " +
                                 std::to_string(index));
      }
      if (index <= prev_index) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": feature indices must be strictly ascending");
      }
      prev_index = index;
      const double value =
          parse_double(pair_text.substr(colon + 1), path, lineno, static_cast<std::size_t>(index));
      entries.emplace_back(index, value);
      max_index = std::max(max_index, index);
    }
    rows.push_back(std::move(entries));
  }
  if (rows.empty()) {
    throw std::runtime_error(path + ": no data rows");
  }
  if (max_index == 0) {
    throw std::runtime_error(path + ": no feature entries in the whole file");
  }
  if (mapper.names.size() < 2) {
    throw std::runtime_error(path + ": need at least two distinct classes");
  }
  Dataset out;
  out.features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), max_index);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [index, value] : rows[i]) {
      out.features(static_cast<Eigen::Index>(i), index - 1) = value;
    }
  }
  out.labels = std::move(labels);
  out.class_count = static_cast<int>(mapper.names.size());
  out.class_names = std::move(mapper.names);
  return out;
}

void write_dense_csv(const Dataset& dataset, const std::string& path) {
  std::string body;
  for (Eigen::Index i = 0; i < dataset.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < dataset.features.cols(); ++j) {
      body += format_17g(dataset.features(i, j));
      body += ',';
    }
    const int id = dataset.labels[static_cast<std::size_t>(i)];
    body += dataset.class_names.empty() ? std::to_string(id)
                                        : dataset.class_names[static_cast<std::size_t>(id - 1)];
    body += '\n';
  }
  write_file_atomic(path, body);
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
  validate_dataset(dataset);
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("split: train fraction must lie in (0, 1)");
  }
  const Eigen::Index m = dataset.features.rows();
  std::mt19937_64 rng(spec.seed);
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;

  if (spec.stratified) {
    std::vector<std::vector<Eigen::Index>> by_class(
        static_cast<std::size_t>(dataset.class_count));
    for (Eigen::Index i = 0; i < m; ++i) {
      by_class[static_cast<std::size_t>(dataset.labels[static_cast<std::size_t>(i)] - 1)]
          .push_back(i);
    }
    for (int c = 0; c < dataset.class_count; ++c) {
      if (by_class[static_cast<std::size_t>(c)].size() < 2) {
        throw std::invalid_argument("split: class " + std::to_string(c + 1) +
                                    " has fewer than 2 samples; cannot stratify");
      }
    }
    // Largest-remainder rounding of the per-class quotas, total pinned to
    // round(frac * m), remainder ties toward the lower class id.
    const long long target = std::llround(spec.train_fraction * static_cast<double>(m));
    std::vector<long long> count(static_cast<std::size_t>(dataset.class_count));
    std::vector<double> remainder(static_cast<std::size_t>(dataset.class_count));
    long long base_total = 0;
    for (int c = 0; c < dataset.class_count; ++c) {
      const double quota =
          spec.train_fraction * static_cast<double>(by_class[static_cast<std::size_t>(c)].size());
      count[static_cast<std::size_t>(c)] = static_cast<long long>(std::floor(quota));
      remainder[static_cast<std::size_t>(c)] = quota - std::floor(quota);
      base_total += count[static_cast<std::size_t>(c)];
    }
    std::vector<int> order(static_cast<std::size_t>(dataset.class_count));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const double ra = remainder[static_cast<std::size_t>(a)];
      const double rb = remainder[static_cast<std::size_t>(b)];
      if (ra != rb) return ra > rb;
      return a < b;
    });
    const long long extra = target - base_total;
    for (long long i = 0; i < extra && i < dataset.class_count; ++i) {
      count[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] += 1;
    }
    // Both sides keep at least one sample per class.
    auto headroom = [&](int c) {
      return static_cast<long long>(by_class[static_cast<std::size_t>(c)].size()) - 1;
    };
    long long total = 0;
    for (int c = 0; c < dataset.class_count; ++c) {
      auto& k = count[static_cast<std::size_t>(c)];
      k = std::clamp(k, 1LL, headroom(c));
      total += k;
    }
    while (total > target) {
      int pick = -1;
      for (int c = 0; c < dataset.class_count; ++c) {
        if (count[static_cast<std::size_t>(c)] > 1 &&
            (pick < 0 ||
             count[static_cast<std::size_t>(c)] > count[static_cast<std::size_t>(pick)])) {
          pick = c;
        }
      }
      if (pick < 0) break;
      count[static_cast<std::size_t>(pick)] -= 1;
      --total;
    }
    while (total < target) {
      int pick = -1;
      for (int c = 0; c < dataset.class_count; ++c) {
        if (count[static_cast<std::size_t>(c)] < headroom(c) &&
            (pick < 0 ||
             count[static_cast<std::size_t>(c)] < count[static_cast<std::size_t>(pick)])) {
          pick = c;
        }
      }
      if (pick < 0) break;
      count[static_cast<std::size_t>(pick)] += 1;
      ++total;
    }
    for (int c = 0; c < dataset.class_count; ++c) {
      auto& members = by_class[static_cast<std::size_t>(c)];
      shuffle_indices(members, rng);
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (i < static_cast<std::size_t>(count[static_cast<std::size_t>(c)])) {
          train_rows.push_back(members[i]);
        } else {
          test_rows.push_back(members[i]);
        }
      }
    }
  } else {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(m));
    std::iota(all.begin(), all.end(), 0);
    shuffle_indices(all, rng);
    const long long target = std::llround(spec.train_fraction * static_cast<double>(m));
    const long long k = std::clamp<long long>(target, 1, m - 1);
    train_rows.assign(all.begin(), all.begin() + k);
    test_rows.assign(all.begin() + k, all.end());
  }

  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  Dataset train = subset(dataset, train_rows);
  Dataset test = subset(dataset, test_rows);
  train = normalize(train);
  test = apply_normalization(test, *train.normalization);
  return {std::move(train), std::move(test)};
}

ResultRecord make_result_record(const SolverConfig& config, const SolverState& state,
                                const FeatureRanking& ranking) {
  ResultRecord r;
  r.config = config;
  r.selected = ranking.selected;
  r.ranking_features = ranking.order;
  r.ranking_norms.reserve(ranking.order.size());
  for (int id : ranking.order) {
    r.ranking_norms.push_back(ranking.row_norms[static_cast<std::size_t>(id - 1)]);
  }
  r.objective_trace = state.objective_trace;
  r.iterations = state.iteration;
  r.converged = state.converged;
  return r;
}

std::string result_to_json(const ResultRecord& record) {
  json j;
  j["config"] = config_to_json(record.config);
  j["selected"] = record.selected;
  json ranking = json::array();
  for (std::size_t i = 0; i < record.ranking_features.size(); ++i) {
    ranking.push_back({{"feature", record.ranking_features[i]},
                       {"norm", record.ranking_norms[i]}});
  }
  j["ranking"] = std::move(ranking);
  j["objective_trace"] = record.objective_trace;
  j["iterations"] = record.iterations;
  j["converged"] = record.converged;
  return j.dump(2) + "\n";
}

void write_result(const ResultRecord& record, const std::string& path,
                  const std::string& format) {
  if (format == "json") {
    write_file_atomic(path, result_to_json(record));
    return;
  }
  if (format == "csv") {
    std::string body = "feature,norm\n";
    for (std::size_t i = 0; i < record.ranking_features.size(); ++i) {
      body += std::to_string(record.ranking_features[i]);
      body += ',';
      body += format_17g(record.ranking_norms[i]);
      body += '\n';
    }
    write_file_atomic(path, body);
    return;
  }
  throw std::invalid_argument("write_result: unknown format '" + format + "'");
}

ResultRecord read_result_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error(path + ": cannot open file");
  }
  json j;
  in >> j;
  ResultRecord r;
  r.config = config_from_json(j.at("config"));
  r.selected = j.at("selected").get<std::vector<int>>();
  for (const auto& entry : j.at("ranking")) {
    r.ranking_features.push_back(entry.at("feature").get<int>());
    r.ranking_norms.push_back(entry.at("norm").get<double>());
  }
  r.objective_trace = j.at("objective_trace").get<std::vector<double>>();
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  return r;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error(tmp + ": cannot open for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw std::runtime_error(tmp + ": write failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error(path + ": cannot open file");
  }
  std::uint64_t hash = 14695981039346656037ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
  return out;
}

}  // namespace l2pfs

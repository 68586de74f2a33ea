#include "l2pfs/cli.hpp"

#include "l2pfs/data_io.hpp"
#include "l2pfs/eval.hpp"
#include "l2pfs/solver.hpp"
#include "l2pfs/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace l2pfs {

namespace {

using nlohmann::json;

constexpr double kClassifierRidge = 1.0;

struct CommonFlags {
  std::string input;
  std::string format = "csv";
  int label_column = 0;  // 0 = last
  double p = 1.0;
  std::string p_grid = "0.1,0.3,0.5,0.7,0.9,1";
  int d = 10;
  std::uint64_t seed = 0;
  int trials = 10;
  int folds = 3;
  std::string out;
  int max_iters = 200;
  double tol = 1e-6;
};

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) return;
    double v = 0.0;
    const char* begin = cur.data();
    const char* end = begin + cur.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !(v > 0.0 && v <= 2.0)) {
      throw std::invalid_argument("--p-grid entry '" + cur + "' is not a p in (0, 2]");
    }
    grid.push_back(v);
    cur.clear();
  };
  for (char ch : text) {
    if (ch == ',') {
      flush();
    } else if (ch != ' ') {
      cur.push_back(ch);
    }
  }
  flush();
  if (grid.empty()) {
    throw std::invalid_argument("--p-grid is empty");
  }
  return grid;
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

Dataset load_input(const CommonFlags& flags) {
  if (flags.format == "csv") {
    return read_dense_csv(flags.input, false, flags.label_column);
  }
  if (flags.format == "libsvm") {
    return read_sparse_libsvm(flags.input);
  }
  throw std::invalid_argument("--format must be csv or libsvm");
}

SolverConfig config_from_flags(const CommonFlags& flags) {
  SolverConfig config;
  config.p = flags.p;
  config.max_outer_iterations = flags.max_iters;
  config.relative_objective_tolerance = flags.tol;
  config.feature_count_d = flags.d;
  return config;
}

json flags_to_json(const CommonFlags& flags) {
  json j;
  j["input"] = flags.input;
  j["format"] = flags.format;
  j["label_col"] = flags.label_column;
  j["p"] = flags.p;
  j["p_grid"] = flags.p_grid;
  j["d"] = flags.d;
  j["seed"] = flags.seed;
  j["trials"] = flags.trials;
  j["folds"] = flags.folds;
  j["out"] = flags.out;
  j["max_iters"] = flags.max_iters;
  j["tol"] = flags.tol;
  return j;
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::vector<std::string>& argv, const json& config,
                    const std::vector<std::string>& input_paths,
                    const std::vector<std::string>& output_paths) {
  json j;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config;
  json inputs = json::object();
  for (const std::string& p : input_paths) {
    inputs[p] = file_digest_hex(p);
  }
  j["inputs"] = std::move(inputs);
  j["outputs"] = output_paths;
  j["version"] = kVersion;
  write_file_atomic(path, j.dump(2) + "\n");
}

std::vector<int> read_truth_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error(path + ": cannot open file");
  }
  std::vector<int> truth;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t;
    for (char ch : line) {
      if (ch != ' ' && ch != '\t' && ch != '\r') t.push_back(ch);
    }
    if (t.empty()) continue;
    int v = 0;
    const char* begin = t.data();
    const char* end = begin + t.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || v < 1) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected a positive feature id, got '" + line + "'");
    }
    truth.push_back(v);
  }
  if (truth.empty()) {
    throw std::runtime_error(path + ": no feature ids");
  }
  return truth;
}

int cmd_select(const CommonFlags& flags, const std::vector<std::string>& argv) {
  Dataset dataset = load_input(flags);
  dataset = normalize(dataset);
  const SolverConfig config = config_from_flags(flags);
  const auto [state, ranking] = run(dataset, config);
  const ResultRecord record = make_result_record(config, state, ranking);

  const std::string json_path = flags.out + ".json";
  const std::string csv_path = flags.out + ".csv";
  write_result(record, json_path, "json");
  write_result(record, csv_path, "csv");
  write_manifest(flags.out + ".manifest.json", "select", argv, flags_to_json(flags),
                 {flags.input}, {json_path, csv_path});
  if (!state.converged) {
    std::cerr << "select: not converged after " << state.iteration
              << " iterations; results written\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_sweep_p(const CommonFlags& flags, const std::vector<std::string>& argv) {
  const std::vector<double> grid = parse_grid(flags.p_grid);
  Dataset dataset = load_input(flags);
  dataset = normalize(dataset);
  SolverConfig base = config_from_flags(flags);

  std::filesystem::create_directories(flags.out);
  const std::vector<SweepEntry> entries = sweep_p(dataset, grid, base);

  std::vector<std::string> outputs;
  std::string summary = "p,objective,support_size,iterations,converged,error\n";
  bool all_ok = true;
  for (const SweepEntry& entry : entries) {
    const std::string tag = format_g(entry.p);
    if (entry.ok) {
      const ResultRecord record = make_result_record(
          [&] { SolverConfig c = base; c.p = entry.p; return c; }(), entry.state, entry.ranking);
      const std::string path =
          (std::filesystem::path(flags.out) / ("p_" + tag + ".json")).string();
      write_result(record, path, "json");
      outputs.push_back(path);
      const RecoveryMetrics metrics = recovery_metrics(entry.ranking, {}, flags.d);
      char line[256];
      std::snprintf(line, sizeof(line), "%s,%.17g,%d,%d,%s,\n", tag.c_str(),
                    entry.state.objective_trace.empty() ? 0.0
                                                        : entry.state.objective_trace.back(),
                    metrics.support_size, entry.state.iteration,
                    entry.state.converged ? "true" : "false");
      summary += line;
      all_ok = all_ok && entry.state.converged;
    } else {
      summary += tag + ",,,,false," + entry.error + "\n";
      all_ok = false;
    }
  }
  const std::string summary_path = (std::filesystem::path(flags.out) / "summary.csv").string();
  write_file_atomic(summary_path, summary);
  outputs.push_back(summary_path);
  write_manifest((std::filesystem::path(flags.out) / "manifest.json").string(), "sweep-p", argv,
                 flags_to_json(flags), {flags.input}, outputs);
  return all_ok ? kExitOk : kExitNotConverged;
}

int cmd_synth(const CommonFlags& flags, int m, int n, int k, int classes, double sep,
              double noise, const std::vector<std::string>& argv) {
  if (k < 1 || k > n) {
    throw std::invalid_argument("--k must lie in 1..n");
  }
  PlantedSpec spec;
  spec.samples = m;
  spec.features = n;
  spec.classes = classes;
  spec.informative.resize(static_cast<std::size_t>(k));
  std::iota(spec.informative.begin(), spec.informative.end(), 1);
  spec.class_separation = sep;
  spec.noise_std = noise;
  spec.seed = flags.seed;
  const auto [dataset, truth] = generate_planted(spec);

  const std::string csv_path = flags.out + ".csv";
  const std::string truth_path = flags.out + ".truth.txt";
  write_dense_csv(dataset, csv_path);
  std::string truth_body;
  for (int id : truth) {
    truth_body += std::to_string(id);
    truth_body += '\n';
  }
  write_file_atomic(truth_path, truth_body);

  json config = flags_to_json(flags);
  config["m"] = m;
  config["n"] = n;
  config["k"] = k;
  config["classes"] = classes;
  config["sep"] = sep;
  config["noise"] = noise;
  write_manifest(flags.out + ".manifest.json", "synth", argv, config, {},
                 {csv_path, truth_path});
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& p_mode, const std::string& truth_path,
             double train_fraction, const std::vector<std::string>& argv) {
  if (flags.trials < 1) {
    throw std::invalid_argument("--trials must be positive");
  }
  const Dataset dataset = load_input(flags);
  std::vector<int> truth;
  if (!truth_path.empty()) {
    truth = read_truth_file(truth_path);
  }
  const bool use_cv = p_mode == "cv";
  double fixed_p = flags.p;
  if (!use_cv) {
    const char* begin = p_mode.data();
    const char* end = begin + p_mode.size();
    const auto [ptr, ec] = std::from_chars(begin, end, fixed_p);
    if (ec != std::errc() || ptr != end || !(fixed_p > 0.0 && fixed_p <= 2.0)) {
      throw std::invalid_argument("--p must be 'cv' or a number in (0, 2]");
    }
  }
  const std::vector<double> grid = parse_grid(flags.p_grid);
  SolverConfig base = config_from_flags(flags);

  json trials_json = json::array();
  std::vector<double> accuracies;
  std::vector<double> precisions;
  std::vector<double> supports;
  std::vector<double> p_used_all;
  bool all_converged = true;
  for (int t = 0; t < flags.trials; ++t) {
    SplitSpec split_spec;
    split_spec.train_fraction = train_fraction;
    split_spec.seed = flags.seed + static_cast<std::uint64_t>(t);
    const auto [train, test] = split(dataset, split_spec);

    SolverConfig cfg = base;
    if (use_cv) {
      cfg.p = cross_validate_p(train, grid, flags.folds, base, split_spec.seed,
                               kClassifierRidge)
                  .best_p;
    } else {
      cfg.p = fixed_p;
    }
    const auto [state, ranking] = run(train, cfg);
    const LinearModel model = simple_classifier_fit(train, ranking.selected, kClassifierRidge);
    const double accuracy = classification_accuracy(model, test);
    const RecoveryMetrics metrics = recovery_metrics(ranking, truth, flags.d);

    json trial;
    trial["trial"] = t;
    trial["p"] = cfg.p;
    trial["accuracy"] = accuracy;
    trial["support_size"] = metrics.support_size;
    if (!truth.empty()) {
      trial["precision_at_d"] = metrics.precision_at_d;
    }
    trial["selected"] = ranking.selected;
    trial["iterations"] = state.iteration;
    trial["converged"] = state.converged;
    trials_json.push_back(std::move(trial));

    accuracies.push_back(accuracy);
    supports.push_back(static_cast<double>(metrics.support_size));
    if (!truth.empty()) {
      precisions.push_back(metrics.precision_at_d);
    }
    p_used_all.push_back(cfg.p);
    all_converged = all_converged && state.converged;
  }

  auto mean_of = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  auto std_of = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
  };

  json report;
  json config = flags_to_json(flags);
  config["p_mode"] = p_mode;
  config["train_fraction"] = train_fraction;
  config["truth"] = truth_path;
  report["config"] = std::move(config);
  report["trials"] = std::move(trials_json);
  report["p_used"] = p_used_all;
  report["accuracy_mean"] = mean_of(accuracies);
  report["accuracy_std"] = std_of(accuracies);
  report["support_mean"] = mean_of(supports);
  report["support_std"] = std_of(supports);
  if (!precisions.empty()) {
    report["precision_mean"] = mean_of(precisions);
    report["precision_std"] = std_of(precisions);
  }
  const std::string report_path = flags.out + ".json";
  write_file_atomic(report_path, report.dump(2) + "\n");
  std::vector<std::string> inputs = {flags.input};
  if (!truth_path.empty()) {
    inputs.push_back(truth_path);
  }
  json manifest_config = flags_to_json(flags);
  manifest_config["p_mode"] = p_mode;
  manifest_config["train_fraction"] = train_fraction;
  manifest_config["truth"] = truth_path;
  write_manifest(flags.out + ".manifest.json", "eval", argv, manifest_config, inputs,
                 {report_path});
  return all_converged ? kExitOk : kExitNotConverged;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"row-sparse linear feature selection"};
  app.name("l2pfs");
  app.require_subcommand(1);

  CommonFlags flags;
  int synth_m = 0;
  int synth_n = 0;
  int synth_k = 0;
  int synth_classes = 2;
  double synth_sep = 1.0;
  double synth_noise = 1.0;
  std::string eval_p_mode = "1";
  std::string eval_truth;
  double eval_train_fraction = 0.6;

  auto add_io = [&](CLI::App* cmd) {
    cmd->add_option("--input", flags.input, "input data file")->required();
    cmd->add_option("--format", flags.format, "csv or libsvm");
    cmd->add_option("--label-col", flags.label_column,
                    "1-based label column for csv; 0 means last");
  };
  auto add_solver = [&](CLI::App* cmd) {
    cmd->add_option("--d", flags.d, "number of features to select");
    cmd->add_option("--max-iters", flags.max_iters, "outer iteration cap");
    cmd->add_option("--tol", flags.tol, "relative objective tolerance");
  };

  CLI::App* select = app.add_subcommand("select", "rank and select features at one p");
  add_io(select);
  add_solver(select);
  select->add_option("--p", flags.p, "sparsity exponent in (0, 2]");
  select->add_option("--seed", flags.seed, "recorded in the manifest");
  select->add_option("--out", flags.out, "output stem: writes <out>.json and <out>.csv")
      ->required();

  CLI::App* sweep = app.add_subcommand("sweep-p", "run the solver across a grid of p values");
  add_io(sweep);
  add_solver(sweep);
  sweep->add_option("--p-grid", flags.p_grid, "comma-separated p values");
  sweep->add_option("--seed", flags.seed, "recorded in the manifest");
  sweep->add_option("--out", flags.out, "output directory")->required();

  CLI::App* synth = app.add_subcommand("synth", "generate a planted-feature dataset");
  synth->add_option("--m", synth_m, "sample count")->required();
  synth->add_option("--n", synth_n, "feature count")->required();
  synth->add_option("--k", synth_k, "planted feature count (features 1..k)")->required();
  synth->add_option("--classes", synth_classes, "class count");
  synth->add_option("--sep", synth_sep, "class separation");
  synth->add_option("--noise", synth_noise, "noise standard deviation");
  synth->add_option("--seed", flags.seed, "generator seed");
  synth->add_option("--out", flags.out, "output stem: writes <out>.csv and <out>.truth.txt")
      ->required();

  CLI::App* eval = app.add_subcommand("eval", "trial-averaged selection and accuracy report");
  add_io(eval);
  add_solver(eval);
  eval->add_option("--p", eval_p_mode, "sparsity exponent, or 'cv' to cross-validate");
  eval->add_option("--p-grid", flags.p_grid, "grid for --p cv");
  eval->add_option("--truth", eval_truth, "planted feature id file for precision");
  eval->add_option("--trials", flags.trials, "number of train/test trials");
  eval->add_option("--folds", flags.folds, "cross-validation folds");
  eval->add_option("--train-frac", eval_train_fraction, "train fraction per trial");
  eval->add_option("--seed", flags.seed, "base seed; trial t uses seed + t");
  eval->add_option("--out", flags.out, "output stem: writes <out>.json")->required();

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("l2pfs");
  for (const std::string& a : args) {
    argv_storage.push_back(a);
  }
  std::vector<const char*> argv;
  argv.reserve(argv_storage.size());
  for (const std::string& a : argv_storage) {
    argv.push_back(a.c_str());
  }

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "l2pfs: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(select)) {
      return cmd_select(flags, args);
    }
    if (app.got_subcommand(sweep)) {
      return cmd_sweep_p(flags, args);
    }
    if (app.got_subcommand(synth)) {
      return cmd_synth(flags, synth_m, synth_n, synth_k, synth_classes, synth_sep, synth_noise,
                       args);
    }
    if (app.got_subcommand(eval)) {
      return cmd_eval(flags, eval_p_mode, eval_truth, eval_train_fraction, args);
    }
  } catch (const std::exception& ex) {
    std::cerr << "l2pfs: " << ex.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace l2pfs

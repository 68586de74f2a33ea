#include "l2pfs/cli.hpp"

#include "l2pfs/data_io.hpp"

#include <json.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("l2pfs_cli_" + std::to_string(std::random_device{}()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (char ch : text) {
    if (ch == '\n') ++lines;
  }
  return lines;
}

// Writes a small planted dataset and returns the csv path.
std::string make_fixture(const TempDir& dir, const std::string& stem) {
  const int rc = l2pfs::run_cli({"synth", "--m", "24", "--n", "12", "--k", "3", "--sep", "3",
                                 "--noise", "0.5", "--seed", "7", "--out", dir.file(stem)});
  REQUIRE(rc == l2pfs::kExitOk);
  return dir.file(stem + ".csv");
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth regenerates identical data per seed and round-trips") {
  TempDir dir;
  const std::string a = make_fixture(dir, "a");
  const std::string b = make_fixture(dir, "b");
  CHECK(read_text(a) == read_text(b));
  CHECK(l2pfs::file_digest_hex(a) == l2pfs::file_digest_hex(b));
  CHECK(read_text(dir.file("a.truth.txt")) == "1\n2\n3\n");

  const l2pfs::Dataset d = l2pfs::read_dense_csv(a, false, 0);
  CHECK(d.features.rows() == 24);
  CHECK(d.features.cols() == 12);
  CHECK(d.class_count == 2);

  // a different seed produces different bytes
  const int rc = l2pfs::run_cli({"synth", "--m", "24", "--n", "12", "--k", "3", "--sep", "3",
                                 "--noise", "0.5", "--seed", "8", "--out", dir.file("c")});
  REQUIRE(rc == l2pfs::kExitOk);
  CHECK(read_text(a) != read_text(dir.file("c.csv")));
}

TEST_CASE("synth rejects a zero planted count") {
  TempDir dir;
  const int rc = l2pfs::run_cli({"synth", "--m", "10", "--n", "5", "--k", "0", "--out",
                                 dir.file("z")});
  CHECK(rc == l2pfs::kExitUsage);
  CHECK_FALSE(std::filesystem::exists(dir.file("z.csv")));
}

TEST_CASE("select writes a parsable result with a descending trace") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  const int rc = l2pfs::run_cli({"select", "--input", csv, "--p", "1", "--d", "5", "--out",
                                 dir.file("run")});
  CHECK(rc == l2pfs::kExitOk);

  const l2pfs::ResultRecord rec = l2pfs::read_result_json(dir.file("run.json"));
  CHECK(rec.selected.size() == 5);
  CHECK(rec.converged);
  CHECK(rec.iterations == static_cast<int>(rec.objective_trace.size()));
  for (std::size_t k = 1; k < rec.objective_trace.size(); ++k) {
    CHECK(rec.objective_trace[k] <= rec.objective_trace[k - 1] * (1.0 + 1e-9));
  }

  const std::string csv_text = read_text(dir.file("run.csv"));
  CHECK(csv_text.substr(0, 13) == "feature,norm\n");
  CHECK(count_lines(csv_text) == 13);  // header plus one row per ranked feature

  const json manifest = json::parse(read_text(dir.file("run.manifest.json")));
  CHECK(manifest.at("command") == "select");
  CHECK(manifest.at("version").is_string());
  CHECK(manifest.at("argv").is_array());
  CHECK(manifest.at("config").at("p") == 1.0);
  CHECK(manifest.at("inputs").at(csv).get<std::string>().size() == 16);
  CHECK(manifest.at("outputs").size() == 2);
}

TEST_CASE("select is byte-stable across reruns") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  const std::vector<std::string> args = {"select", "--input", csv, "--p", "0.5",
                                         "--d",    "4",       "--out", dir.file("r1")};
  REQUIRE(l2pfs::run_cli(args) == l2pfs::kExitOk);
  const std::string first_json = read_text(dir.file("r1.json"));
  const std::string first_manifest = read_text(dir.file("r1.manifest.json"));
  REQUIRE(l2pfs::run_cli(args) == l2pfs::kExitOk);
  CHECK(read_text(dir.file("r1.json")) == first_json);
  CHECK(read_text(dir.file("r1.manifest.json")) == first_manifest);
}

TEST_CASE("select exits with a usage error on bad requests") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  // d exceeds the feature count
  CHECK(l2pfs::run_cli({"select", "--input", csv, "--d", "13", "--out", dir.file("x")}) ==
        l2pfs::kExitUsage);
  // missing input file
  CHECK(l2pfs::run_cli({"select", "--input", dir.file("nope.csv"), "--d", "2", "--out",
                        dir.file("x")}) == l2pfs::kExitUsage);
  // --out is required
  CHECK(l2pfs::run_cli({"select", "--input", csv}) == l2pfs::kExitUsage);
  // p outside the admissible interval
  CHECK(l2pfs::run_cli({"select", "--input", csv, "--p", "3", "--d", "2", "--out",
                        dir.file("x")}) == l2pfs::kExitUsage);
  // unknown subcommand
  CHECK(l2pfs::run_cli({"frobnicate"}) == l2pfs::kExitUsage);
  CHECK(l2pfs::run_cli({}) == l2pfs::kExitUsage);
}

TEST_CASE("select reports non-convergence through the exit code") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  const int rc = l2pfs::run_cli({"select", "--input", csv, "--d", "3", "--max-iters", "1",
                                 "--tol", "1e-16", "--out", dir.file("r")});
  CHECK(rc == l2pfs::kExitNotConverged);
  // results are still written for inspection
  const l2pfs::ResultRecord rec = l2pfs::read_result_json(dir.file("r.json"));
  CHECK_FALSE(rec.converged);
  CHECK(rec.iterations == 1);
}

TEST_CASE("sweep over one exponent writes one record and one summary row") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  const int rc = l2pfs::run_cli({"sweep-p", "--input", csv, "--p-grid", "1.0", "--d", "4",
                                 "--out", dir.file("sweep")});
  CHECK(rc == l2pfs::kExitOk);
  CHECK(std::filesystem::exists(dir.file("sweep/p_1.json")));
  const std::string summary = read_text(dir.file("sweep/summary.csv"));
  CHECK(count_lines(summary) == 2);
  CHECK(summary.substr(0, summary.find('\n')) ==
        "p,objective,support_size,iterations,converged,error");
  const json manifest = json::parse(read_text(dir.file("sweep/manifest.json")));
  CHECK(manifest.at("command") == "sweep-p");
}

TEST_CASE("sweep across the default grid writes one row per exponent") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  const int rc = l2pfs::run_cli({"sweep-p", "--input", csv, "--d", "4", "--out",
                                 dir.file("sweep")});
  CHECK((rc == l2pfs::kExitOk || rc == l2pfs::kExitNotConverged));
  const std::string summary = read_text(dir.file("sweep/summary.csv"));
  CHECK(count_lines(summary) == 7);  // header plus six grid entries
}

TEST_CASE("sweep rejects malformed grids") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  CHECK(l2pfs::run_cli({"sweep-p", "--input", csv, "--p-grid", "0,1", "--out",
                        dir.file("s")}) == l2pfs::kExitUsage);
  CHECK(l2pfs::run_cli({"sweep-p", "--input", csv, "--p-grid", "abc", "--out",
                        dir.file("s")}) == l2pfs::kExitUsage);
}

TEST_CASE("eval aggregates trials into mean and deviation fields") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  const int rc = l2pfs::run_cli({"eval", "--input", csv, "--p", "1", "--d", "3", "--trials",
                                 "10", "--max-iters", "400", "--truth",
                                 dir.file("data.truth.txt"), "--out", dir.file("report")});
  CHECK(rc == l2pfs::kExitOk);
  const json report = json::parse(read_text(dir.file("report.json")));
  CHECK(report.at("trials").size() == 10);
  CHECK(report.at("accuracy_mean").is_number());
  CHECK(report.at("accuracy_std").is_number());
  CHECK(report.at("support_mean").is_number());
  CHECK(report.at("support_std").is_number());
  CHECK(report.at("precision_mean").is_number());
  CHECK(report.at("precision_std").is_number());
  CHECK(report.at("p_used").size() == 10);
  const double acc = report.at("accuracy_mean").get<double>();
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  for (const auto& trial : report.at("trials")) {
    CHECK(trial.at("converged").get<bool>());
    CHECK(trial.at("selected").size() == 3);
    CHECK(trial.at("precision_at_d").is_number());
  }
}

TEST_CASE("eval single trial is deterministic") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  const std::vector<std::string> args = {"eval", "--input", csv,   "--p",   "0.5",
                                         "--d",  "3",       "--trials", "1", "--seed", "3",
                                         "--out", dir.file("one")};
  REQUIRE(l2pfs::run_cli(args) == l2pfs::kExitOk);
  const std::string first = read_text(dir.file("one.json"));
  REQUIRE(l2pfs::run_cli(args) == l2pfs::kExitOk);
  CHECK(read_text(dir.file("one.json")) == first);
}

TEST_CASE("eval runs under both fixture exponents") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  for (const char* p : {"0.5", "1"}) {
    const int rc = l2pfs::run_cli({"eval", "--input", csv, "--p", p, "--d", "3", "--trials",
                                   "2", "--out", dir.file(std::string("rep_") + p)});
    CHECK(rc == l2pfs::kExitOk);
  }
}

TEST_CASE("eval cross-validates the exponent when asked") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  const int rc = l2pfs::run_cli({"eval", "--input", csv, "--p", "cv", "--p-grid", "0.5,1",
                                 "--folds", "2", "--d", "3", "--trials", "1", "--out",
                                 dir.file("cv")});
  CHECK(rc == l2pfs::kExitOk);
  const json report = json::parse(read_text(dir.file("cv.json")));
  const double p_used = report.at("p_used").at(0).get<double>();
  CHECK((p_used == 0.5 || p_used == 1.0));
}

TEST_CASE("eval rejects a bad p mode") {
  TempDir dir;
  const std::string csv = make_fixture(dir, "data");
  CHECK(l2pfs::run_cli({"eval", "--input", csv, "--p", "huge", "--out", dir.file("x")}) ==
        l2pfs::kExitUsage);
  CHECK(l2pfs::run_cli({"eval", "--input", csv, "--p", "1", "--trials", "0", "--out",
                        dir.file("x")}) == l2pfs::kExitUsage);
}

TEST_CASE("help and version exit cleanly") {
  CHECK(l2pfs::run_cli({"--help"}) == l2pfs::kExitOk);
  CHECK(l2pfs::run_cli({"select", "--help"}) == l2pfs::kExitOk);
}

}  // TEST_SUITE

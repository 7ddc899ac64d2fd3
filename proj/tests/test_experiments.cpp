#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "todalab/error.hpp"
#include "todalab/experiments.hpp"
#include "todalab/thermal.hpp"

using namespace toda;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("todalab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

ExperimentConfig small(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.N = 32;
  c.T = 1.0;
  c.seed = 9;
  return c;
}

std::vector<ResultRow> all_rows(const ExperimentOutput& o) {
  std::vector<ResultRow> rows;
  for (const auto& r : o.replicas) rows.insert(rows.end(), r.rows.begin(), r.rows.end());
  return rows;
}

bool same_cell(const Cell& x, const Cell& y) { return x == y; }

}  // namespace

TEST_CASE("runs are reproducible byte for byte") {
  auto c = small("evolve");
  c.replicas = 2;
  c.output_dir = scratch("det_a").string();
  write_outputs(c, run_experiment(c));
  auto d = c;
  d.output_dir = scratch("det_b").string();
  write_outputs(d, run_experiment(d));
  CHECK(slurp(fs::path(c.output_dir) / "results.csv") == slurp(fs::path(d.output_dir) / "results.csv"));
  CHECK(first_line(fs::path(c.output_dir) / "results.csv") == "experiment,replica,time,key,value");
  auto manifest = json::parse(slurp(fs::path(c.output_dir) / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(c));
  CHECK(manifest["seed"] == 9);
  CHECK(manifest["stream_ids"].size() == 2);
  CHECK(fs::exists(fs::path(c.output_dir) / "summary.json"));
}

TEST_CASE("replicas are independent of how runs are split") {
  auto c = small("thouless");
  c.replicas = 4;
  auto whole = all_rows(run_experiment(c));
  std::vector<ResultRow> pieces;
  for (std::uint64_t r = 0; r < 4; ++r) {
    auto d = c;
    d.replicas = 1;
    d.first_replica = r;
    auto rows = all_rows(run_experiment(d));
    pieces.insert(pieces.end(), rows.begin(), rows.end());
  }
  REQUIRE(whole.size() == pieces.size());
  for (std::size_t i = 0; i < whole.size(); ++i) {
    CHECK(whole[i].replica == pieces[i].replica);
    CHECK(whole[i].key == pieces[i].key);
    CHECK(same_cell(whole[i].value, pieces[i].value));
  }
}

TEST_CASE("thermal thouless residuals") {
  auto c = small("thouless");
  c.replicas = 100;
  auto out = run_experiment(c);
  CHECK(out.summary["max_thouless_residual"].get<double>() <= 1e-9);
  CHECK(out.summary["acceptance"]["AC3"]["pass"] == true);
}

TEST_CASE("scattering report") {
  auto c = small("scattering");
  c.N = 128;
  c.T = 4.0;
  c.replicas = 2;
  c.output_dir = scratch("scatter").string();
  auto out = run_experiment(c);
  CHECK(out.summary.contains("median_normalized_residual"));
  CHECK(out.summary["max_abs_residual_t0"].get<double>() == 0.0);
  CHECK(out.summary["acceptance"].contains("AC8"));
  write_outputs(c, out);
  CHECK(first_line(fs::path(c.output_dir) / "replica_0" / "scattering_report.csv") ==
        "k,lambda,Q0,QT,residual,normalized_residual,bulk_flag");
  CHECK(slurp(fs::path(c.output_dir) / "results.csv").find("nan") == std::string::npos);
}

TEST_CASE("velocity table") {
  auto c = small("velocity");
  c.N = 64;
  c.T = 2.0;
  c.output_dir = scratch("velocity").string();
  auto out = run_experiment(c);
  write_outputs(c, out);
  CHECK(first_line(fs::path(c.output_dir) / "replica_0" / "velocity.csv") == "k,lambda,v_solved,v_empirical,bulk_flag");
  CHECK(out.summary["acceptance"].contains("AC10"));
}

TEST_CASE("every experiment runs on a small lattice") {
  const std::map<std::string, std::vector<std::string>> expected = {
      {"evolve", {"AC1", "AC2"}},   {"spectrum", {"AC12"}},   {"thouless", {"AC3", "AC4"}},
      {"centers", {"AC5"}},         {"charges", {"AC6", "AC7"}}, {"scattering", {"AC8"}},
      {"velocity", {"AC10"}},       {"compare-domains", {"AC9"}}, {"invariance", {"AC11"}},
      {"sample", {}}};
  for (const auto& name : experiment_names()) {
    CAPTURE(name);
    auto c = small(name);
    c.replicas = 2;
    c.draws = 1000;
    if (name == "compare-domains") {
      c.N = 64;
      c.K_grid = {2, 4, 8};
    }
    if (name == "spectrum") c.replicas = 20;
    auto out = run_experiment(c);
    REQUIRE(expected.count(name) == 1);
    for (const auto& ac : expected.at(name)) CHECK(out.summary["acceptance"].contains(ac));
    CHECK(out.summary["experiment"] == name);
    for (const auto& r : all_rows(out))
      if (auto* d = std::get_if<double>(&r.value)) CHECK(std::isfinite(*d));
  }
}

TEST_CASE("configuration errors") {
  ExperimentConfig c;
  CHECK_THROWS_AS(apply_override(c, "no_such_key", "1"), InvalidArgument);
  CHECK_THROWS_AS(config_from_json(json{{"bogus", 1}}), InvalidArgument);
  apply_override(c, "N", "48");
  CHECK(c.N == 48);
  auto bad = small("nonsense");
  CHECK_THROWS_AS(run_experiment(bad), InvalidArgument);
  // log(beta) == digamma(theta) exactly in floating point.
  auto zero = small("scattering");
  zero.beta = 2.5162868309393636;
  zero.theta = 3.0;
  REQUIRE(stretch_parameter(zero.beta, zero.theta) == 0.0);
  CHECK_THROWS_AS(run_experiment(zero), InvalidArgument);
  zero.experiment = "velocity";
  CHECK_THROWS_AS(run_experiment(zero), InvalidArgument);
  auto j = json::parse(zero.to_json().dump());
  CHECK(config_from_json(j).beta == zero.beta);
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "undefined");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("command line exit codes") {
  const std::string cli = TODALAB_CLI_PATH;
  const std::string dir = scratch("cli").string();
  auto run = [&](const std::string& args) {
    int s = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  CHECK(run("thouless --N 16 --replicas 2 --output_dir " + dir) == 0);
  CHECK(fs::exists(fs::path(dir) / "summary.json"));
  CHECK(run("thouless --N 16 --bogus 3") == 2);
  CHECK(run("nonsense") == 2);
  CHECK(run("evolve --N 0 --output_dir " + dir) == 2);
}

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "todalab/experiments.hpp"

using toda::ExperimentConfig;
using toda::json;

namespace {

struct Run {
  json summary;
  double seconds = 0.0;
  std::string error;
};

Run run(ExperimentConfig cfg) {
  Run r;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.summary = toda::run_experiment(cfg).summary;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

ExperimentConfig base(const std::string& experiment, std::size_t n, double T, std::size_t replicas) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.N = n;
  c.T = T;
  c.replicas = replicas;
  c.seed = 20240607;
  return c;
}

}  // namespace

int main() {
  struct Criterion {
    std::string id;
    std::string run;
    double budget;
  };
  const std::vector<Criterion> criteria = {
      {"AC1", "evolve", 60},       {"AC2", "evolve", 60},        {"AC3", "thouless64", 30},
      {"AC4", "thouless32", 30},   {"AC5", "centers", 120},      {"AC6", "charges64", 60},
      {"AC7", "charges512", 300},  {"AC8", "scattering", 600},   {"AC9", "compare-domains", 300},
      {"AC10", "velocity", 600},   {"AC11", "invariance", 300},  {"AC12", "spectrum", 600},
  };

  std::map<std::string, std::function<Run()>> runners;
  runners["evolve"] = [] { return run(base("evolve", 256, 10.0, 1)); };
  runners["thouless64"] = [] { return run(base("thouless", 64, 0.0, 1000)); };
  runners["thouless32"] = [] { return run(base("thouless", 32, 0.0, 200)); };
  runners["centers"] = [] { return run(base("centers", 256, 0.0, 100)); };
  runners["charges64"] = [] {
    auto c = base("charges", 64, 1.0, 1);
    return run(c);
  };
  runners["charges512"] = [] { return run(base("charges", 512, std::pow(512.0, 0.4), 32)); };
  runners["scattering"] = [] { return run(base("scattering", 512, 20.0, 16)); };
  runners["compare-domains"] = [] { return run(base("compare-domains", 256, 5.0, 32)); };
  runners["velocity"] = [] { return run(base("velocity", 1024, 32.0, 1)); };
  runners["invariance"] = [] {
    auto c = base("invariance", 64, 10.0, 200);
    c.draws = 100000;
    return run(c);
  };
  runners["spectrum"] = [] { return run(base("spectrum", 128, 0.0, 10000)); };

  std::map<std::string, Run> done;
  int failures = 0;
  for (const auto& c : criteria) {
    if (!done.count(c.run)) done[c.run] = runners[c.run]();
    const Run& r = done[c.run];
    bool pass = false;
    std::string detail;
    if (!r.error.empty()) {
      detail = "error: " + r.error;
    } else if (!r.summary["acceptance"].contains(c.id)) {
      detail = "no result";
    } else {
      json a = r.summary["acceptance"][c.id];
      pass = a["pass"].get<bool>() && r.seconds < c.budget;
      a.erase("pass");
      detail = a.dump();
    }
    if (!pass) ++failures;
    std::printf("%s %s  %.1fs (budget %.0fs)  %s\n", pass ? "PASS" : "FAIL", c.id.c_str(), r.seconds, c.budget,
                detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

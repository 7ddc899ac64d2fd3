#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "todalab/lattice.hpp"

namespace toda {

using json = nlohmann::json;

std::vector<long> default_K_grid();

struct ExperimentConfig {
  std::string experiment = "evolve";
  double beta = 1.0;
  double theta = 1.0;
  std::size_t N = 64;
  double T = 10.0;
  double step = 1e-3;
  std::string scheme = "rk4";
  double rel_tol = 1e-11;
  double abs_tol = 1e-13;
  double sample_every = 0.0;
  // 0 selects (2N)^{-1}.
  double zeta = 0.0;
  double collar_fraction = 0.1;
  // Negative selects the fractional collar.
  long collar_sites = -1;
  std::size_t replicas = 1;
  std::uint64_t first_replica = 0;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  // Experiment-specific knobs.
  std::size_t draws = 100000;
  // Every integer in [10, 80].
  std::vector<long> K_grid = default_K_grid();
  double window_width = 0.0;  // 0 selects T
  double delta_min = 1e-6;
  double delta_max = 1e-3;

  IntegratorConfig integrator() const;
  double zeta_for(std::size_t n) const;
  std::size_t collar_for(std::size_t n, double horizon) const;
  json to_json() const;
  void validate() const;
};

// Flat JSON object with the field names above. Unknown keys are rejected.
ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {});
// Applies a single key=value override given as text.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

// A value in the long-format results table. Strings carry sentinels.
using Cell = std::variant<double, std::string>;

struct ResultRow {
  std::string experiment;
  std::uint64_t replica = 0;
  double time = 0.0;
  std::string key;
  Cell value;
};

struct DetailTable {
  std::string filename;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct ReplicaOutput {
  std::uint64_t replica = 0;
  std::vector<ResultRow> rows;
  std::vector<DetailTable> tables;
};

struct ExperimentOutput {
  std::vector<ReplicaOutput> replicas;
  json summary;
};

std::vector<std::string> experiment_names();
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

// Writes results.csv, summary.json, manifest.json and per-replica tables.
void write_outputs(const ExperimentConfig& cfg, const ExperimentOutput& out);

std::string format_double(double v);
std::string config_hash(const ExperimentConfig& cfg);

// Worker count from TODA_LAB_THREADS (0 or unset selects the hardware count).
std::size_t worker_count();
// Runs fn(r) for r in [0, count) on worker threads; results keep index order.
std::vector<ReplicaOutput> parallel_replicas(std::size_t count, const std::function<ReplicaOutput(std::size_t)>& fn);

}  // namespace toda

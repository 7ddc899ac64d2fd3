#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "todalab/error.hpp"
#include "todalab/experiments.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

void flag_partial(const toda::ExperimentConfig& cfg, const std::string& what) {
  try {
    toda::ExperimentOutput out;
    out.summary = {{"experiment", cfg.experiment}, {"partial", true}, {"error", what}};
    toda::write_outputs(cfg, out);
  } catch (...) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toda lattice laboratory"};
  app.require_subcommand(1);

  std::string config_file;
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : toda::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_file, "JSON configuration file");
    for (const auto& key : toda::config_keys()) {
      if (key == "experiment") continue;
      sub->add_option_function<std::string>("--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
                                            "override " + key);
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  toda::ExperimentConfig cfg;
  try {
    for (const auto& [name, sub] : subs)
      if (sub->parsed()) cfg.experiment = name;
    if (!config_file.empty()) {
      std::ifstream is(config_file);
      if (!is) throw toda::InvalidArgument("cannot open config file " + config_file);
      toda::json j;
      try {
        is >> j;
      } catch (const toda::json::exception& e) {
        throw toda::InvalidArgument(std::string("config parse error: ") + e.what());
      }
      if (j.contains("experiment") && j["experiment"] != cfg.experiment)
        throw toda::InvalidArgument("config experiment does not match subcommand");
      cfg = toda::config_from_json(j, cfg);
    }
    for (const auto& [key, value] : overrides) toda::apply_override(cfg, key, value);
    cfg.validate();
  } catch (const toda::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    const toda::ExperimentOutput out = toda::run_experiment(cfg);
    toda::write_outputs(cfg, out);
    std::cout << out.summary.dump(2) << '\n';
  } catch (const toda::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const toda::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    flag_partial(cfg, e.what());
    return kNumericalError;
  } catch (const toda::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    flag_partial(cfg, e.what());
    return kNumericalError;
  }
  return 0;
}

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "volfilter/checks.hpp"
#include "volfilter/config.hpp"
#include "volfilter/errors.hpp"
#include "volfilter/experiment.hpp"

namespace {

using namespace volfilter;

void print_nested(const std::exception& e, int depth = 0) {
  std::cerr << std::string(2 * depth, ' ') << "error: " << e.what() << '\n';
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_nested(inner, depth + 1);
  }
}

// Exit code 2 for configuration problems, including ones surfaced through a stage.
bool is_usage_error(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ValidationError*>(&e)) {
    return true;
  }
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    return is_usage_error(inner);
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partially observed stochastic volatility: simulation, filtering and duality checks"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::size_t threads = 0;
  std::vector<std::string> checks;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "TOML run configuration (defaults if omitted)");
    sub->add_option("--seed", seed, "Override the master seed");
    sub->add_option("-o,--out", out_dir, "Override the output directory");
    sub->add_option("-j,--threads", threads, "Worker threads (0 = VOLFILTER_THREADS or all cores)");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "Simulate market paths, write paths.csv");
  CLI::App* filter = app.add_subcommand("filter", "Run the Kalman-Bucy and particle filters");
  CLI::App* value = app.add_subcommand("value", "Solve the dual value coefficients");
  CLI::App* optimize = app.add_subcommand("optimize", "Monte Carlo of the optimal policy");
  CLI::App* verify = app.add_subcommand("verify", "Run the numerical checks");
  CLI::App* report = app.add_subcommand("report", "Run every stage and write report.txt");
  CLI::App* show = app.add_subcommand("show-config", "Print the effective configuration");
  for (CLI::App* sub : {simulate, filter, value, optimize, verify, report, show}) add_common(sub);
  verify->add_option("--check", checks, "Restrict to the named checks (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_experiment_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    // Checks size their own thread pools, so the override goes through the environment.
    if (threads > 0) setenv("VOLFILTER_THREADS", std::to_string(threads).c_str(), 1);
    if (!checks.empty()) {
      for (const auto& name : checks) {
        if (std::find(known_checks().begin(), known_checks().end(), name) == known_checks().end()) {
          throw ConfigError("unknown check '" + name + "'");
        }
      }
      cfg.checks = checks;
    }

    if (*show) {
      std::cout << render_experiment_config(cfg);
      return 0;
    }
    if (*verify) {
      VerificationReport rep;
      const StageReport stage = run_verify_stage(cfg, &rep);
      std::cout << rep.render() << stage.render();
      return rep.all_pass() ? 0 : 1;
    }
    StageReport stage;
    if (*simulate) stage = run_simulate_stage(cfg, threads);
    if (*filter) stage = run_filter_stage(cfg, threads);
    if (*value) stage = run_value_stage(cfg, threads);
    if (*optimize) stage = run_optimize_stage(cfg, threads);
    if (*report) stage = run_report_stage(cfg, threads);
    std::cout << stage.render();
    return 0;
  } catch (const std::exception& e) {
    print_nested(e);
    return is_usage_error(e) ? 2 : 1;
  }
}

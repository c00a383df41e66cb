#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "volfilter/checks.hpp"
#include "volfilter/config.hpp"

namespace volfilter {

// Outcome of one pipeline stage. `files` are relative to cfg.output_dir.
struct StageReport {
  std::string stage;
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<std::string> files;

  std::string render() const;
};

// Every stage recomputes what it needs from the configuration, so each can run
// on its own. Module errors surface as StageError with the original nested.
// `workers` = 0 uses worker_count().

// paths.csv with the first export_paths paths; summary over all n_paths.
StageReport run_simulate_stage(const ExperimentConfig& cfg, std::size_t workers = 0);
// filters/kb_path<i>.csv for the exported paths and filters/particle_path0.csv.
StageReport run_filter_stage(const ExperimentConfig& cfg, std::size_t workers = 0);
// value_coeffs.csv (power) and the dual value summary.
StageReport run_value_stage(const ExperimentConfig& cfg, std::size_t workers = 0);
// terminal_wealth.csv of the optimal policy and its Monte Carlo estimate.
StageReport run_optimize_stage(const ExperimentConfig& cfg, std::size_t workers = 0);
// checks.txt from run_checks.
StageReport run_verify_stage(const ExperimentConfig& cfg, VerificationReport* report = nullptr);
// Runs simulate, filter, value and optimize, writes report.txt and, when
// cfg.plots is set, filter.svg and wealth_fan.svg.
StageReport run_report_stage(const ExperimentConfig& cfg, std::size_t workers = 0);

}  // namespace volfilter

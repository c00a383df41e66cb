#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "volfilter/config.hpp"

namespace volfilter {

struct CheckResult {
  std::string name;
  bool pass = false;
  double statistic = 0.0;  // compared against tolerance in the direction given by `relation`
  double tolerance = 0.0;
  std::string relation = "<=";
  double runtime_s = 0.0;
  std::vector<std::pair<std::string, std::string>> details;

  void add(const std::string& key, double value);
  void add(const std::string& key, const std::string& value);
  std::string line() const;  // "[PASS] name: statistic <= tolerance (...)"
};

// Each check reads its sizes (grid, n_paths, n_particles, seed, theta_mode)
// from the configuration and never touches the output directory except
// check_determinism, which writes under <output_dir>/determinism.

// Stationary residual of Θ∞ (<= 1e-8) and the observed RK4 order (>= 3.8).
CheckResult check_riccati(const ExperimentConfig& cfg);
// Max finite-difference PDE residual of Φ over 100 random points (h = 1e-4).
CheckResult check_pde_residual(const ExperimentConfig& cfg);
// Closed-form Hamiltonian against a golden-section minimization of the bracket,
// and nu* against a grid argmin.
CheckResult check_hamiltonian(const ExperimentConfig& cfg);
// Empirical error covariance of the Kalman-Bucy filter against Θ(T) and
// whiteness of the innovations.
CheckResult check_filter_consistency(const ExperimentConfig& cfg);
// Mean |particle - Kalman-Bucy| at T over n_seeds observation paths.
CheckResult check_particle_vs_kb(const ExperimentConfig& cfg, std::size_t n_seeds = 50);
CheckResult check_duality_gap_log(const ExperimentConfig& cfg);
CheckResult check_duality_gap_power(const ExperimentConfig& cfg);
// The optimal policy against five perturbations under common random numbers.
CheckResult check_optimality_log(const ExperimentConfig& cfg);
CheckResult check_optimality_power(const ExperimentConfig& cfg);
// Closed forms of the degenerate limits (GBM, OU recursion, Merton, pi = 0).
CheckResult check_degenerate(const ExperimentConfig& cfg);
// Byte comparison of stage outputs across 1, 4 and 8 workers.
CheckResult check_determinism(const ExperimentConfig& cfg);

// ConfigError for unknown names.
CheckResult run_check(const std::string& name, const ExperimentConfig& cfg);

struct VerificationReport {
  std::vector<CheckResult> checks;
  bool all_pass() const;
  std::string render() const;
};

// Runs cfg.checks in order.
VerificationReport run_checks(const ExperimentConfig& cfg);

}  // namespace volfilter

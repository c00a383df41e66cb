// Acceptance suite: one line per criterion at the pinned sizes and tolerances.
// Exit status is 0 only when every criterion passes.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "volfilter/checks.hpp"
#include "volfilter/config.hpp"
#include "volfilter/csv_io.hpp"

using namespace volfilter;

namespace {

struct Criterion {
  int id;
  std::string title;
  double runtime_limit_s;
  std::vector<std::function<CheckResult()>> parts;
};

ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.grid = TimeGrid::make(0.0, 1.0, 1000);
  cfg.utility = UtilitySpec::power(0.5);
  cfg.theta_mode = ThetaMode::Stationary;
  cfg.seed = 20240601;
  cfg.output_dir = (std::filesystem::temp_directory_path() / "volfilter_acceptance").string();
  return cfg;
}

ExperimentConfig with_paths(std::size_t n) {
  ExperimentConfig cfg = base_config();
  cfg.n_paths = n;
  return cfg;
}

}  // namespace

int main() {
  const ExperimentConfig base = base_config();
  ExperimentConfig filter_cfg = with_paths(2000);
  filter_cfg.grid = TimeGrid::make(0.0, 1.0, 2000);
  ExperimentConfig particle_cfg = base;
  particle_cfg.n_particles = 5000;
  const ExperimentConfig mc = with_paths(100000);
  ExperimentConfig mc_log = mc;
  mc_log.utility = UtilitySpec::log_utility();

  const std::vector<Criterion> criteria = {
      {1, "Riccati stationary residual and RK4 order", 1.0, {[&] { return check_riccati(base); }}},
      {2, "PDE residual of the power value function", 5.0, {[&] { return check_pde_residual(base); }}},
      {3, "Hamiltonian inf-form vs closed form", 10.0, {[&] { return check_hamiltonian(base); }}},
      {4, "Kalman-Bucy consistency, 2000 paths, dt = 1/2000", 120.0,
       {[&] { return check_filter_consistency(filter_cfg); }}},
      {5, "particle vs Kalman-Bucy, N = 5000, 50 seeds", 300.0,
       {[&] { return check_particle_vs_kb(particle_cfg, 50); }}},
      {6, "log duality gap, 1e5 paths", 120.0, {[&] { return check_duality_gap_log(mc_log); }}},
      {7, "power duality gap, 1e5 paths, p = 0.5, Stationary", 180.0,
       {[&] { return check_duality_gap_power(mc); }}},
      {8, "optimality against perturbations, power and log, 1e5 paths", 600.0,
       {[&] { return check_optimality_power(mc); }, [&] { return check_optimality_log(mc_log); }}},
      {9, "degenerate closed forms", 0.0, {[&] { return check_degenerate(base); }}},
      {10, "determinism across 1, 4 and 8 workers", 0.0, {[&] { return check_determinism(base); }}},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    bool pass = true;
    double runtime = 0.0;
    std::vector<std::string> lines;
    for (const auto& part : c.parts) {
      try {
        const CheckResult r = part();
        pass = pass && r.pass;
        runtime += r.runtime_s;
        lines.push_back(r.line());
      } catch (const std::exception& e) {
        pass = false;
        lines.push_back(std::string("[FAIL] error: ") + e.what());
      }
    }
    const bool in_time = c.runtime_limit_s <= 0.0 || runtime < c.runtime_limit_s;
    pass = pass && in_time;
    if (!pass) ++failures;
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.title
              << " | runtime " << format_double(runtime) << " s";
    if (c.runtime_limit_s > 0.0) {
      std::cout << " (limit " << format_double(c.runtime_limit_s) << " s"
                << (in_time ? "" : ", exceeded") << ")";
    }
    std::cout << '\n';
    for (const auto& l : lines) std::cout << "    " << l << '\n';
    std::cout.flush();
  }
  std::filesystem::remove_all(base.output_dir);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << '\n';
  return failures == 0 ? 0 : 1;
}

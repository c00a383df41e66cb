#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volfilter/dual_value.hpp"
#include "volfilter/filtering.hpp"
#include "volfilter/sde_sim.hpp"

namespace volfilter {

enum class PolicyProvenance { ClosedFormLog, ClosedFormPower, Constant, Perturbed };

enum class PowerPolicyForm {
  General,    // pi = m / ((1 - p) g) - K1ᵀ DΦ / g
  AsPrinted,  // 1/(p-1) and -rho sigma_V [Ã + (T - t)] variant, for comparison only
};

using PolicyRule = std::function<double(double t, double v, double m)>;

// Fraction of wealth in the stock as a function of (t, V_t, mu_bar_t).
struct Policy {
  UtilitySpec utility;
  PolicyProvenance provenance = PolicyProvenance::Constant;
  PolicyRule rule;
  std::string label;
  // Perturbed policies: rule = scale * base + shift.
  std::shared_ptr<const Policy> base;
  double shift = 0.0;
  double scale = 1.0;

  double operator()(double t, double v, double m) const { return rule(t, v, m); }
};

// pi = m / g(v).
Policy policy_log(const ModelParams& params);
Policy policy_power(std::shared_ptr<const ValueCoeffs> coeffs, std::shared_ptr<const YField> field,
                    PowerPolicyForm form = PowerPolicyForm::General);
Policy constant_policy(double pi, const UtilitySpec& utility, std::string label = "constant");
Policy perturbed_policy(const Policy& base, double shift, double scale, std::string label);

// Merton fraction with the drift frozen at its prior mean and g at V0.
double merton_fraction(const ModelParams& params, const UtilitySpec& utility);

struct WealthPath {
  std::vector<double> log_R;  // n_steps + 1
  std::vector<double> pi;     // n_steps, after clipping
  double R(std::size_t i) const;
  double terminal() const { return R(log_R.size() - 1); }
};

struct WealthBatch {
  std::vector<WealthPath> paths;
  std::size_t clip_count = 0;
};

// Log-Euler wealth recursion with pi evaluated at (t_i, V_i, mu_bar_i) and
// clipped to [-pi_max, pi_max]. Returns the number of clipped steps.
std::size_t wealth_path(const ModelParams& params, const TimeGrid& grid, const MarketPath& path,
                        std::span<const double> mu_bar, const Policy& policy, double x0,
                        double pi_max, WealthPath& out);

WealthBatch wealth_simulate(const PathSet& paths, const std::vector<FilterOutput>& filters,
                            const Policy& policy, double x0, double pi_max = 10.0);

struct MCReport {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

// Sample mean of U(R_T) with standard error sample-stddev / sqrt(n).
MCReport mc_expected_utility(std::span<const double> terminal_wealth, const UtilitySpec& utility,
                             std::uint64_t seed = 0);
// Mean and standard error of arbitrary samples, pairwise summed in index order.
MCReport mc_mean(std::span<const double> samples, std::uint64_t seed = 0);

// Log: ln x - Φ0. Power: x^p / p exp(-(1 - p) Φ0).
double primal_value_closed(double x, const UtilitySpec& utility, double phi0);

// Primal weight from a dual control through the K1/K2 pairing along `direction`
// (the m-axis by default): pi = [psi - (K1ᵀd / K2ᵀd) nu] / ((1 - p) g).
double nu_to_pi(double nu, double t, const Vec2& y, double p, const YField& field,
                const std::optional<Vec2>& direction = std::nullopt);

// Monte Carlo engine: simulates paths, runs the Kalman-Bucy filter once per
// path and evaluates every policy on the same path (common random numbers).
struct McSetup {
  ModelParams params;
  TimeGrid grid;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  double x0 = 1.0;
  double pi_max = 10.0;
  SimulationOptions simulation;
};

struct PolicyOutcome {
  std::vector<double> log_terminal_wealth;  // per path
  std::size_t clip_count = 0;
  std::vector<double> terminal_wealth() const;
};

struct McOutcome {
  std::vector<PolicyOutcome> policies;
  std::vector<double> half_psi_integral;  // ½∫ mu_bar² dt per path (left-point rule)
};

McOutcome simulate_policies(const McSetup& setup, const std::vector<Policy>& policies,
                            std::size_t workers = 0);

}  // namespace volfilter

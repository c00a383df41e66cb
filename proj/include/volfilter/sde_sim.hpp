#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "volfilter/models.hpp"
#include "volfilter/time_grid.hpp"

namespace volfilter {

// One discretized trajectory. State series have n_steps + 1 entries, increment
// series n_steps. log S is stored so the price stays positive by construction.
struct MarketPath {
  std::vector<double> log_S;
  std::vector<double> V;
  std::vector<double> mu;
  std::vector<double> beta;  // zeros unless GarchFactor
  std::vector<double> dW1, dW2, dW3, dW4;
  std::size_t truncated_steps = 0;

  double S(std::size_t i) const;
  std::size_t n_steps() const { return dW1.size(); }
};

struct PathSet {
  ModelParams params;
  TimeGrid grid;
  std::uint64_t seed = 0;
  std::vector<MarketPath> paths;
};

enum class NoiseMode {
  Random,
  // All Brownian increments set to zero; used for deterministic-recursion checks.
  Zero,
};

struct SimulationOptions {
  NoiseMode noise = NoiseMode::Random;
  // Overrides the prior draw of mu_0 / beta_0 when set (NaN = draw from prior).
  double mu0 = std::numeric_limits<double>::quiet_NaN();
  double beta0 = std::numeric_limits<double>::quiet_NaN();
};

// g and k after clipping the variance state at zero for truncated models; may be zero.
VolCoefficients clipped_coefficients(const ModelParams& params, double v);

// Simulates path `path_index` of the set addressed by `seed` into `out`,
// reusing its buffers. The substream depends only on (seed, path_index).
void simulate_path(const ModelParams& params, const TimeGrid& grid, std::uint64_t seed,
                   std::size_t path_index, MarketPath& out, const SimulationOptions& options = {});

// Same scheme driven by caller-supplied increments (each of length n_steps;
// dW4 may be empty for models without a beta process).
void simulate_path_from_increments(const ModelParams& params, const TimeGrid& grid,
                                   double mu0, double beta0, MarketPath& path);

PathSet simulate_paths(const ModelParams& params, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t seed, const SimulationOptions& options = {},
                       std::size_t workers = 0);

struct ObservedIncrements {
  std::vector<double> dW1;
  std::vector<double> dW2;
};

// Reconstructs the observation Brownians from (S, V) with coefficients frozen
// at the left endpoint of each step.
ObservedIncrements observed_brownians(const MarketPath& path, const ModelParams& params,
                                      const TimeGrid& grid);
void observed_brownians(const MarketPath& path, const ModelParams& params, const TimeGrid& grid,
                        ObservedIncrements& out);

// Rolling realized volatility sqrt(sum of squared log returns / (window dt)).
// Entry j uses the returns j .. j + window - 1.
std::vector<double> realized_vol_estimate(std::span<const double> log_S, double dt,
                                          std::size_t window);

// Inverts g: returns v with g(v) = g_hat.
double volatility_from_realized(const ModelParams& params, double g_hat);

}  // namespace volfilter

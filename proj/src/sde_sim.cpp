#include "volfilter/sde_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "volfilter/errors.hpp"
#include "volfilter/parallel.hpp"
#include "volfilter/rng.hpp"

namespace volfilter {

TimeGrid TimeGrid::make(double t0, double T, std::size_t n_steps) {
  if (!std::isfinite(t0) || !std::isfinite(T) || !(T > t0)) {
    throw DomainError("time grid needs finite t0 < T");
  }
  if (n_steps < 1) throw DomainError("time grid needs n_steps >= 1");
  return TimeGrid{t0, T, n_steps};
}

double MarketPath::S(std::size_t i) const { return std::exp(log_S.at(i)); }

namespace {

bool has_beta(const ModelParams& params) { return params.kind == ModelKind::GarchFactor; }

}  // namespace

VolCoefficients clipped_coefficients(const ModelParams& params, double v) {
  switch (params.kind) {
    case ModelKind::LogOU:
      return {std::exp(v), params.sigma_V};
    case ModelKind::GarchFactor: {
      const double w = std::max(v, 0.0);
      return {std::sqrt(w), params.sigma_V * w};
    }
    case ModelKind::Heston: {
      const double s = std::sqrt(std::max(v, 0.0));
      return {s, params.sigma_V * s};
    }
    case ModelKind::SteinStein:
      return {std::abs(v), params.sigma_V};
  }
  throw KindError("unhandled model kind");
}

namespace {

double drift_state(const ModelParams& params, double v) {
  return uses_truncation(params.kind) ? std::max(v, 0.0) : v;
}

void resize_path(MarketPath& path, std::size_t n) {
  path.log_S.resize(n + 1);
  path.V.resize(n + 1);
  path.mu.resize(n + 1);
  path.beta.resize(n + 1);
  path.dW1.resize(n);
  path.dW2.resize(n);
  path.dW3.resize(n);
  path.dW4.assign(n, 0.0);
}

}  // namespace

void simulate_path_from_increments(const ModelParams& params, const TimeGrid& grid, double mu0,
                                   double beta0, MarketPath& path) {
  const std::size_t n = grid.n_steps;
  if (path.dW1.size() != n || path.dW2.size() != n || path.dW3.size() != n) {
    throw DimensionError("increment series must have n_steps entries");
  }
  if (path.dW4.empty()) path.dW4.assign(n, 0.0);
  if (path.dW4.size() != n) throw DimensionError("dW4 must be empty or have n_steps entries");
  path.log_S.resize(n + 1);
  path.V.resize(n + 1);
  path.mu.resize(n + 1);
  path.beta.resize(n + 1);

  const double dt = grid.dt();
  const double rb = rho_bar(params);
  const bool factor = is_factor_form(params.kind);
  const bool truncate = uses_truncation(params.kind);
  const bool beta_on = has_beta(params);

  path.log_S[0] = std::log(params.S0);
  path.V[0] = params.V0;
  path.mu[0] = mu0;
  path.beta[0] = beta_on ? beta0 : 0.0;
  path.truncated_steps = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const double v = path.V[i];
    const double mu = path.mu[i];
    const double beta = path.beta[i];
    const auto [g, k] = clipped_coefficients(params, v);
    const double price_drift = factor ? mu * g : mu;
    path.log_S[i + 1] = path.log_S[i] + (price_drift - 0.5 * g * g) * dt + g * path.dW1[i];
    path.V[i + 1] = v + vol_drift(params, beta, drift_state(params, v)) * dt +
                    k * (params.rho * path.dW1[i] + rb * path.dW2[i]);
    path.mu[i + 1] = mu + params.lambda_mu * (params.theta_mu - mu) * dt + params.sigma_mu * path.dW3[i];
    path.beta[i + 1] =
        beta_on ? beta + params.lambda_beta * beta * dt + params.sigma_beta * path.dW4[i] : 0.0;
    if (truncate && path.V[i + 1] <= 0.0) ++path.truncated_steps;
  }
  if (truncate && 10 * path.truncated_steps > n) {
    throw SimulationError("variance state stayed nonpositive on " +
                          std::to_string(path.truncated_steps) + " of " + std::to_string(n) +
                          " steps");
  }
}

void simulate_path(const ModelParams& params, const TimeGrid& grid, std::uint64_t seed,
                   std::size_t path_index, MarketPath& out, const SimulationOptions& options) {
  const std::size_t n = grid.n_steps;
  const bool beta_on = has_beta(params);
  resize_path(out, n);
  double mu0 = params.m0;
  double beta0 = params.m1;
  if (options.noise == NoiseMode::Zero) {
    std::fill(out.dW1.begin(), out.dW1.end(), 0.0);
    std::fill(out.dW2.begin(), out.dW2.end(), 0.0);
    std::fill(out.dW3.begin(), out.dW3.end(), 0.0);
  } else {
    NormalStream rng(seed, StreamTag::Path, path_index);
    mu0 += std::sqrt(params.sigma0) * rng.normal();
    if (beta_on) beta0 += std::sqrt(params.sigma1) * rng.normal();
    const double sq = std::sqrt(grid.dt());
    for (std::size_t i = 0; i < n; ++i) {
      out.dW1[i] = sq * rng.normal();
      out.dW2[i] = sq * rng.normal();
      out.dW3[i] = sq * rng.normal();
      if (beta_on) out.dW4[i] = sq * rng.normal();
    }
  }
  if (!std::isnan(options.mu0)) mu0 = options.mu0;
  if (!std::isnan(options.beta0)) beta0 = options.beta0;
  simulate_path_from_increments(params, grid, mu0, beta0, out);
}

PathSet simulate_paths(const ModelParams& params, const TimeGrid& grid, std::size_t n_paths,
                       std::uint64_t seed, const SimulationOptions& options, std::size_t workers) {
  if (n_paths < 1) throw DomainError("n_paths must be at least 1");
  PathSet set{params, grid, seed, std::vector<MarketPath>(n_paths)};
  parallel_for(
      n_paths,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          simulate_path(params, grid, seed, i, set.paths[i], options);
        }
      },
      workers);
  return set;
}

void observed_brownians(const MarketPath& path, const ModelParams& params, const TimeGrid& grid,
                        ObservedIncrements& out) {
  const std::size_t n = grid.n_steps;
  if (path.log_S.size() != n + 1 || path.V.size() != n + 1) {
    throw DimensionError("path does not match the grid");
  }
  out.dW1.resize(n);
  out.dW2.resize(n);
  const double dt = grid.dt();
  const double rb = rho_bar(params);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [g, k] = model_coefficients(params, drift_state(params, path.V[i]));
    if (!(g > 0.0) || !(k > 0.0)) throw DomainError("g or k vanishes on the path");
    const double w1 = (path.log_S[i + 1] - path.log_S[i] + 0.5 * g * g * dt) / g;
    out.dW1[i] = w1;
    out.dW2[i] = (path.V[i + 1] - path.V[i] - params.rho * k * w1) / (rb * k);
  }
}

ObservedIncrements observed_brownians(const MarketPath& path, const ModelParams& params,
                                      const TimeGrid& grid) {
  ObservedIncrements out;
  observed_brownians(path, params, grid, out);
  return out;
}

std::vector<double> realized_vol_estimate(std::span<const double> log_S, double dt,
                                          std::size_t window) {
  if (window < 2) throw DomainError("window must be at least 2");
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (log_S.size() < window + 1) throw InsufficientData("series shorter than the window");
  const std::size_t n_ret = log_S.size() - 1;
  std::vector<double> sq(n_ret);
  for (std::size_t i = 0; i < n_ret; ++i) {
    const double r = log_S[i + 1] - log_S[i];
    sq[i] = r * r;
  }
  // Each window is summed afresh to keep the estimate free of running-sum drift.
  std::vector<double> out(n_ret - window + 1);
  for (std::size_t j = 0; j < out.size(); ++j) {
    double qv = 0.0;
    for (std::size_t i = j; i < j + window; ++i) qv += sq[i];
    out[j] = std::sqrt(qv / (static_cast<double>(window) * dt));
  }
  return out;
}

double volatility_from_realized(const ModelParams& params, double g_hat) {
  if (!(g_hat > 0.0)) throw DomainError("realized volatility must be positive to invert g");
  switch (params.kind) {
    case ModelKind::LogOU:
      return std::log(g_hat);
    case ModelKind::GarchFactor:
    case ModelKind::Heston:
      return g_hat * g_hat;
    case ModelKind::SteinStein:
      return g_hat;
  }
  throw KindError("unhandled model kind");
}

}  // namespace volfilter

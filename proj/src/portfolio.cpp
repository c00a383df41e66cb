#include "volfilter/portfolio.hpp"

#include <algorithm>
#include <cmath>

#include "volfilter/errors.hpp"
#include "volfilter/exact_sum.hpp"
#include "volfilter/parallel.hpp"

namespace volfilter {

Policy policy_log(const ModelParams& params) {
  Policy pol;
  pol.utility = UtilitySpec::log_utility();
  pol.provenance = PolicyProvenance::ClosedFormLog;
  pol.label = "log-optimal";
  pol.rule = [params](double, double v, double m) {
    return m / clipped_coefficients(params, v).g;
  };
  return pol;
}

Policy policy_power(std::shared_ptr<const ValueCoeffs> coeffs, std::shared_ptr<const YField> field,
                    PowerPolicyForm form) {
  Policy pol;
  pol.utility = UtilitySpec::power(coeffs->p);
  pol.provenance = PolicyProvenance::ClosedFormPower;
  pol.label = form == PowerPolicyForm::General ? "power-optimal" : "power-as-printed";
  if (form == PowerPolicyForm::General) {
    pol.rule = [coeffs, field](double t, double v, double m) {
      const Vec2 y(v, m);
      const double g = model_coefficients(field->params(), v).g;
      const PhiValue ph = phi_eval(*coeffs, t, v, m);
      return m / ((1.0 - coeffs->p) * g) - field->K1(t, y).dot(ph.grad) / g;
    };
  } else {
    pol.rule = [coeffs, field](double t, double v, double m) {
      const ModelParams& prm = field->params();
      const double g = model_coefficients(prm, v).g;
      const CoeffPoint c = coeffs->at(t);
      const double tau = coeffs->grid.T - t;
      const double th11 = field->theta(t)(0, 0);
      return m / ((coeffs->p - 1.0) * g) - prm.rho * prm.sigma_V * (c.A_tilde + tau) / g +
             th11 * (2.0 * c.A_bar * m + c.B_bar) / g;
    };
  }
  return pol;
}

Policy constant_policy(double pi, const UtilitySpec& utility, std::string label) {
  Policy pol;
  pol.utility = utility;
  pol.provenance = PolicyProvenance::Constant;
  pol.label = std::move(label);
  pol.rule = [pi](double, double, double) { return pi; };
  return pol;
}

Policy perturbed_policy(const Policy& base, double shift, double scale, std::string label) {
  Policy pol;
  pol.utility = base.utility;
  pol.provenance = PolicyProvenance::Perturbed;
  pol.label = std::move(label);
  pol.base = std::make_shared<const Policy>(base);
  pol.shift = shift;
  pol.scale = scale;
  pol.rule = [b = pol.base, shift, scale](double t, double v, double m) {
    return scale * (*b)(t, v, m) + shift;
  };
  return pol;
}

double merton_fraction(const ModelParams& params, const UtilitySpec& utility) {
  const double ratio = params.m0 / model_coefficients(params, params.V0).g;
  return utility.kind == UtilityKind::Log ? ratio : ratio / (1.0 - utility.p);
}

double WealthPath::R(std::size_t i) const { return std::exp(log_R.at(i)); }

std::size_t wealth_path(const ModelParams& params, const TimeGrid& grid, const MarketPath& path,
                        std::span<const double> mu_bar, const Policy& policy, double x0,
                        double pi_max, WealthPath& out) {
  const std::size_t n = grid.n_steps;
  if (path.n_steps() != n || mu_bar.size() != n + 1) {
    throw DimensionError("path, filter and grid are misaligned");
  }
  if (!(x0 > 0.0)) throw DomainError("initial wealth must be positive");
  out.log_R.resize(n + 1);
  out.pi.resize(n);
  out.log_R[0] = std::log(x0);
  const double dt = grid.dt();
  const bool factor = is_factor_form(params.kind);
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = path.V[i];
    const double g = clipped_coefficients(params, v).g;
    double pi = policy(grid.time(i), v, mu_bar[i]);
    if (!std::isfinite(pi)) throw DomainError("policy returned a non-finite weight");
    if (std::abs(pi) > pi_max) {
      pi = std::clamp(pi, -pi_max, pi_max);
      ++clipped;
    }
    out.pi[i] = pi;
    const double excess = factor ? path.mu[i] * g : path.mu[i];
    const double pg = pi * g;
    out.log_R[i + 1] = out.log_R[i] + pi * excess * dt - 0.5 * pg * pg * dt + pg * path.dW1[i];
  }
  return clipped;
}

WealthBatch wealth_simulate(const PathSet& paths, const std::vector<FilterOutput>& filters,
                            const Policy& policy, double x0, double pi_max) {
  if (filters.size() != paths.paths.size()) {
    throw DimensionError("one filter output per path is required");
  }
  WealthBatch batch;
  batch.paths.resize(paths.paths.size());
  std::vector<std::size_t> clips(paths.paths.size(), 0);
  parallel_for(paths.paths.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (!(filters[i].grid == paths.grid)) throw DimensionError("filter grid differs from path grid");
      clips[i] = wealth_path(paths.params, paths.grid, paths.paths[i], filters[i].mu_bar, policy, x0,
                             pi_max, batch.paths[i]);
    }
  });
  for (std::size_t c : clips) batch.clip_count += c;
  return batch;
}

MCReport mc_mean(std::span<const double> samples, std::uint64_t seed) {
  const std::size_t n = samples.size();
  if (n == 0) throw DomainError("no samples");
  const double mean = pairwise_sum(samples) / static_cast<double>(n);
  double se = 0.0;
  if (n > 1) {
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = (samples[i] - mean) * (samples[i] - mean);
    se = std::sqrt(pairwise_sum(dev) / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return {mean, se, n, seed};
}

MCReport mc_expected_utility(std::span<const double> terminal_wealth, const UtilitySpec& utility,
                             std::uint64_t seed) {
  std::vector<double> u(terminal_wealth.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(terminal_wealth[i] > 0.0)) throw DomainError("terminal wealth must be positive");
    u[i] = utility.U(terminal_wealth[i]);
  }
  return mc_mean(u, seed);
}

double primal_value_closed(double x, const UtilitySpec& utility, double phi0) {
  if (!(x > 0.0)) throw DomainError("initial wealth must be positive");
  if (utility.kind == UtilityKind::Log) return std::log(x) - phi0;
  return std::pow(x, utility.p) / utility.p * std::exp(-(1.0 - utility.p) * phi0);
}

double nu_to_pi(double nu, double t, const Vec2& y, double p, const YField& field,
                const std::optional<Vec2>& direction) {
  const double g = model_coefficients(field.params(), y[0]).g;
  const double base = field.psi(y) / ((1.0 - p) * g);
  if (nu == 0.0) return base;
  const Vec2 d = direction.value_or(Vec2(0.0, 1.0));
  const double pair = field.K2(t, y).dot(d);
  if (pair == 0.0) throw SingularPairingError("K2 pairing vanishes along the chosen direction");
  return base - field.K1(t, y).dot(d) / pair * nu / ((1.0 - p) * g);
}

std::vector<double> PolicyOutcome::terminal_wealth() const {
  std::vector<double> out(log_terminal_wealth.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_terminal_wealth[i]);
  return out;
}

McOutcome simulate_policies(const McSetup& setup, const std::vector<Policy>& policies,
                            std::size_t workers) {
  const ModelParams& params = setup.params;
  const TimeGrid& grid = setup.grid;
  const SignalDynamics dyn = filter_dynamics(params);
  const FilterPrior prior = filter_prior(params);
  const auto theta = std::make_shared<const RiccatiPath>(riccati_theta(dyn, prior.cov, grid));

  McOutcome outcome;
  outcome.policies.resize(policies.size());
  for (auto& po : outcome.policies) po.log_terminal_wealth.assign(setup.n_paths, 0.0);
  outcome.half_psi_integral.assign(setup.n_paths, 0.0);
  std::vector<std::vector<std::size_t>> clips(policies.size(),
                                              std::vector<std::size_t>(setup.n_paths, 0));
  const double dt = grid.dt();

  parallel_for(
      setup.n_paths,
      [&](std::size_t begin, std::size_t end) {
        MarketPath path;
        ObservedIncrements obs;
        WealthPath wealth;
        std::vector<double> mu_bar(grid.nodes());
        for (std::size_t i = begin; i < end; ++i) {
          simulate_path(params, grid, setup.seed, i, path, setup.simulation);
          observed_brownians(path, params, grid, obs);
          KalmanBucyStepper kb(dyn, theta, prior.mean);
          mu_bar[0] = prior.mean[0];
          double acc = 0.0;
          for (std::size_t k = 0; k < grid.n_steps; ++k) {
            acc += mu_bar[k] * mu_bar[k];
            kb.step(k, obs.dW1[k], obs.dW2[k]);
            mu_bar[k + 1] = kb.mean()[0];
          }
          outcome.half_psi_integral[i] = 0.5 * acc * dt;
          for (std::size_t j = 0; j < policies.size(); ++j) {
            clips[j][i] = wealth_path(params, grid, path, mu_bar, policies[j], setup.x0,
                                      setup.pi_max, wealth);
            outcome.policies[j].log_terminal_wealth[i] = wealth.log_R.back();
          }
        }
      },
      workers);
  for (std::size_t j = 0; j < policies.size(); ++j) {
    for (std::size_t c : clips[j]) outcome.policies[j].clip_count += c;
  }
  return outcome;
}

}  // namespace volfilter

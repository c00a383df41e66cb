#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "volfilter/errors.hpp"
#include "volfilter/portfolio.hpp"

using namespace volfilter;

namespace {

PowerProblem canonical_problem(std::size_t n_steps = 200) {
  return solve_power_problem(canonical_params(), 0.5, TimeGrid::make(0.0, 1.0, n_steps),
                             ThetaMode::Stationary);
}

}  // namespace

TEST_CASE("log-optimal policy") {
  const Policy pol = policy_log(canonical_params());
  const double v = std::log(2.0);
  CHECK(pol(0.0, v, 0.1) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(pol(0.0, v, 0.0) == 0.0);
  CHECK(pol(0.7, v, 0.1) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(pol.provenance == PolicyProvenance::ClosedFormLog);
}

TEST_CASE("Merton fraction") {
  ModelParams p = canonical_params();
  p.m0 = 0.06;
  p.V0 = 0.0;
  CHECK(merton_fraction(p, UtilitySpec::power(0.5)) == doctest::Approx(0.12).epsilon(1e-15));
  CHECK(merton_fraction(p, UtilitySpec::log_utility()) == doctest::Approx(0.06).epsilon(1e-15));
}

TEST_CASE("power policy reduces to Merton without hedging demand") {
  ModelParams p = canonical_params();
  p.rho = 0.0;
  p.sigma_mu = 0.0;
  p.sigma0 = 0.0;
  const PowerProblem prob =
      solve_power_problem(p, 0.5, TimeGrid::make(0.0, 1.0, 100), ThetaMode::Stationary);
  const Policy pol = policy_power(prob.coeffs, prob.field);
  for (double t : {0.0, 0.4, 1.0}) {
    for (double m : {-0.1, 0.1}) {
      CHECK(pol(t, -1.0, m) == doctest::Approx(m / (0.5 * std::exp(-1.0))).epsilon(1e-12));
    }
  }
}

TEST_CASE("dual control maps to the primal weight") {
  const PowerProblem prob = canonical_problem();
  const Policy pol = policy_power(prob.coeffs, prob.field);
  const YField& f = *prob.field;
  for (double t : {0.0, 0.35, 0.8}) {
    for (double v : {-2.0, -1.6, -1.0}) {
      for (double m : {-0.1, 0.05, 0.2}) {
        const Vec2 y(v, m);
        const PhiValue ph = phi_eval(*prob.coeffs, t, v, m);
        const double nu = nu_star(*prob.coeffs, f, t, y);
        const double g = std::exp(v);
        CHECK(nu_to_pi(0.0, t, y, 0.5, f) == doctest::Approx(m / (0.5 * g)).epsilon(1e-15));
        CHECK(std::abs(nu_to_pi(nu, t, y, 0.5, f, ph.grad) - pol(t, v, m)) <= 1e-10);
      }
    }
  }
  const Vec2 y(-1.6, 0.1);
  const Vec2 k2 = f.K2(0.2, y);
  const Vec2 orth(-k2[1], k2[0]);
  CHECK_THROWS_AS(nu_to_pi(0.3, 0.2, y, 0.5, f, orth), SingularPairingError);
}

TEST_CASE("perturbed and constant policies") {
  const Policy base = constant_policy(0.4, UtilitySpec::log_utility());
  const Policy pert = perturbed_policy(base, 0.1, 1.2, "p");
  CHECK(pert(0.0, 0.0, 0.0) == doctest::Approx(0.58));
  CHECK(pert.provenance == PolicyProvenance::Perturbed);
  CHECK(pert.base->label == "constant");
}

TEST_CASE("wealth recursion") {
  const ModelParams p = canonical_params();
  const TimeGrid grid = TimeGrid::make(0.0, 1.0, 250);
  MarketPath path;
  simulate_path(p, grid, 3, 0, path);
  const std::vector<double> mu_bar(grid.nodes(), 0.05);
  const UtilitySpec u = UtilitySpec::log_utility();
  WealthPath w;

  CHECK(wealth_path(p, grid, path, mu_bar, constant_policy(0.0, u), 1.7, 10.0, w) == 0);
  for (std::size_t i = 0; i <= 250; ++i) CHECK(w.R(i) == 1.7);

  // Holding only the stock replicates the price.
  wealth_path(p, grid, path, mu_bar, constant_policy(1.0, u), 1.0, 10.0, w);
  CHECK(w.terminal() == doctest::Approx(path.S(250) / path.S(0)).epsilon(1e-12));

  CHECK(wealth_path(p, grid, path, mu_bar, constant_policy(20.0, u), 1.0, 10.0, w) == 250);
  CHECK(w.pi.front() == 10.0);

  CHECK_THROWS_AS(wealth_path(p, grid, path, std::vector<double>(10, 0.0), constant_policy(0.0, u),
                              1.0, 10.0, w),
                  DimensionError);
  CHECK_THROWS_AS(wealth_path(p, grid, path, mu_bar, constant_policy(0.0, u), 0.0, 10.0, w),
                  DomainError);
  CHECK_THROWS_AS(wealth_path(p, grid, path, mu_bar, constant_policy(std::nan(""), u), 1.0, 10.0, w),
                  DomainError);
}

TEST_CASE("Monte Carlo estimators") {
  const std::vector<double> two{1.0, std::exp(2.0)};
  const MCReport r = mc_expected_utility(two, UtilitySpec::log_utility(), 9);
  CHECK(r.estimate == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.std_error == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.n == 2);
  CHECK(r.seed == 9);

  const std::vector<double> flat(37, 2.5);
  const MCReport c = mc_mean(flat);
  CHECK(c.estimate == 2.5);
  CHECK(c.std_error == 0.0);
  CHECK_THROWS_AS(mc_mean(std::vector<double>{}), DomainError);
  CHECK_THROWS_AS(mc_expected_utility(std::vector<double>{-1.0}, UtilitySpec::log_utility()),
                  DomainError);
}

TEST_CASE("closed-form primal values") {
  CHECK(primal_value_closed(1.0, UtilitySpec::log_utility(), 0.0) == 0.0);
  CHECK(primal_value_closed(1.0, UtilitySpec::power(0.5), 0.0) == doctest::Approx(2.0));
  CHECK(primal_value_closed(std::exp(1.0), UtilitySpec::log_utility(), -0.5) == doctest::Approx(1.5));
}

TEST_CASE("policy Monte Carlo is independent of the worker count") {
  McSetup setup;
  setup.params = canonical_params();
  setup.grid = TimeGrid::make(0.0, 1.0, 100);
  setup.n_paths = 30;
  setup.seed = 21;
  const PowerProblem prob = canonical_problem(100);
  const std::vector<Policy> pols{policy_log(setup.params), policy_power(prob.coeffs, prob.field)};
  const McOutcome a = simulate_policies(setup, pols, 1);
  const McOutcome b = simulate_policies(setup, pols, 4);
  for (std::size_t j = 0; j < pols.size(); ++j) {
    CHECK(a.policies[j].log_terminal_wealth == b.policies[j].log_terminal_wealth);
  }
  CHECK(a.half_psi_integral == b.half_psi_integral);
}

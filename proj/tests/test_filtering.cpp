#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "volfilter/errors.hpp"
#include "volfilter/filtering.hpp"
#include "volfilter/sde_sim.hpp"

using namespace volfilter;

namespace {

double max_abs(const Mat2& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("LogOU filter matrices") {
  ModelParams p = canonical_params();
  p.rho = 0.0;
  const SignalDynamics d0 = logou_filter_matrices(p);
  CHECK(max_abs(d0.A - Mat2{{-p.lambda_mu, 0.0}, {0.0, -p.lambda_V}}) == 0.0);
  CHECK(d0.b[0] == doctest::Approx(p.lambda_mu * p.theta_mu));
  CHECK(d0.b[1] == 0.0);
  CHECK(max_abs(d0.G - Mat2{{p.sigma_mu, 0.0}, {0.0, 0.0}}) == 0.0);
  CHECK(max_abs(d0.B - Mat2{{0.0, 0.0}, {0.0, -p.lambda_V}}) == 0.0);

  p.rho = -0.5;
  p.lambda_mu = 0.5;
  p.lambda_V = 1.0;
  const SignalDynamics d1 = logou_filter_matrices(p);
  CHECK(d1.A(1, 0) == doctest::Approx(0.288675).epsilon(1e-6));

  ModelParams h = p;
  h.kind = ModelKind::Heston;
  CHECK_THROWS_AS(filter_dynamics(h), KindError);
}

TEST_CASE("GarchFactor signal dynamics") {
  ModelParams p;
  p.kind = ModelKind::GarchFactor;
  p.theta = 0.0;
  p.sigma_V = 0.3;
  p.lambda_mu = 0.5;
  p.theta_mu = 0.1;
  p.sigma_mu = 0.3;
  p.lambda_beta = 0.3;
  p.sigma_beta = 0.2;
  p.rho = 0.0;
  p.V0 = 0.04;
  const SignalDynamics d0 = garch_signal_dynamics(p);
  CHECK(d0.drift(Vec2(0.2, 0.5))[0] == doctest::Approx(p.lambda_mu * (p.theta_mu - 0.2)));
  CHECK(d0.drift(Vec2(0.2, 0.5))[1] == doctest::Approx(p.lambda_beta * 0.5));
  CHECK(max_abs(d0.G - Mat2{{0.3, 0.0}, {0.0, -0.2 / 0.3}}) <= 1e-15);
  CHECK(max_abs(d0.B) == 0.0);

  p.rho = -0.5;
  const SignalDynamics d1 = garch_signal_dynamics(p);
  CHECK(d1.drift(Vec2::Zero())[1] == doctest::Approx(0.028868).epsilon(1e-5));
}

TEST_CASE("Riccati fixed points") {
  SignalDynamics zero;
  const TimeGrid grid = TimeGrid::make(0.0, 1.0, 100);
  const RiccatiPath z = riccati_theta(zero, Mat2::Zero(), grid);
  for (const Mat2& th : z.Theta) CHECK(max_abs(th) == 0.0);

  ModelParams p = canonical_params();
  p.sigma_mu = 0.0;
  const RiccatiPath g0 = riccati_theta(logou_filter_matrices(p), Mat2::Zero(), grid);
  for (const Mat2& th : g0.Theta) CHECK(max_abs(th) == 0.0);
}

TEST_CASE("Riccati path against a refined integration") {
  ModelParams p = canonical_params();
  p.sigma0 = 0.04;
  const SignalDynamics dyn = logou_filter_matrices(p);
  const FilterPrior prior = filter_prior(p);
  CHECK(prior.cov(0, 1) == doctest::Approx(0.04 * 0.57735).epsilon(1e-5));
  CHECK(prior.cov(1, 1) == doctest::Approx(0.04 / 3.0).epsilon(1e-12));
  const RiccatiPath coarse = riccati_theta(dyn, prior.cov, TimeGrid::make(0.0, 1.0, 100));
  const RiccatiPath fine = riccati_theta(dyn, prior.cov, TimeGrid::make(0.0, 1.0, 800));
  CHECK(max_abs(coarse.terminal() - fine.terminal()) <= 1e-8);

  for (std::size_t i = 0; i < coarse.Theta.size(); ++i) {
    const Mat2& th = coarse.Theta[i];
    CHECK(th(0, 1) == th(1, 0));
    CHECK(th.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() >= -1e-12);
  }

  // Hermite interpolation between coarse nodes tracks the fine solution.
  double worst = 0.0;
  for (std::size_t k = 1; k < 800; k += 7) {
    worst = std::max(worst, max_abs(coarse.at(fine.grid.time(k)) - fine.Theta[k]));
  }
  CHECK(worst <= 1e-9);
  CHECK_THROWS_AS(coarse.at(1.5), RangeError);

  Mat2 asym = prior.cov;
  asym(0, 1) += 1e-3;
  CHECK_THROWS_AS(riccati_theta(dyn, asym, coarse.grid), DomainError);
}

TEST_CASE("stationary Riccati solution") {
  const ModelParams p = canonical_params();
  const SignalDynamics dyn = logou_filter_matrices(p);
  const RiccatiPath stat = stationary_riccati(dyn, Mat2::Zero());
  const Mat2& th = stat.terminal();
  CHECK(riccati_residual(dyn, th) <= 1e-8);
  CHECK(th(0, 0) == doctest::Approx(p.sigma0).epsilon(1e-10));
  // The prior is rank one along (1, -rho/rho_bar) and the flow keeps it there.
  const double c = -p.rho / rho_bar(p);
  const RiccatiPath from_prior = riccati_theta(dyn, filter_prior(p).cov, TimeGrid::make(0.0, 2.0, 400));
  for (const Mat2& m : from_prior.Theta) {
    CHECK(m(0, 1) == doctest::Approx(c * m(0, 0)).epsilon(1e-10));
    CHECK(m(1, 1) == doctest::Approx(c * c * m(0, 0)).epsilon(1e-10));
  }
}

TEST_CASE("RK4 self-convergence is fourth order") {
  ModelParams p = canonical_params();
  p.sigma0 = 0.01;
  const SignalDynamics dyn = logou_filter_matrices(p);
  const RiccatiConvergence conv =
      riccati_self_convergence(dyn, filter_prior(p).cov, 1.0, {500, 1000, 2000});
  REQUIRE(conv.orders.size() == 1);
  CHECK(conv.orders[0] >= 3.8);
  CHECK(conv.orders[0] <= 4.2);
  CHECK_THROWS_AS(riccati_self_convergence(dyn, Mat2::Zero(), 1.0, {500, 700}), DomainError);
}

TEST_CASE("Kalman-Bucy deterministic limit") {
  ModelParams p = canonical_params();
  p.sigma_mu = 0.0;
  p.sigma0 = 0.0;
  p.m0 = 0.3;
  const TimeGrid grid = TimeGrid::make(0.0, 2.0, 2000);
  MarketPath path;
  simulate_path(p, grid, 4, 0, path);
  const ObservedIncrements obs = observed_brownians(path, p, grid);
  const FilterOutput f = kalman_bucy_run(filter_dynamics(p), obs, grid, filter_prior(p));
  double worst_closed = 0.0;
  double worst_truth = 0.0;
  for (std::size_t i = 0; i <= grid.n_steps; ++i) {
    const double t = grid.time(i);
    const double ou = p.theta_mu + (p.m0 - p.theta_mu) * std::exp(-p.lambda_mu * t);
    worst_closed = std::max(worst_closed, std::abs(f.mu_bar[i] - ou));
    worst_truth = std::max(worst_truth, std::abs(f.mu_bar[i] - path.mu[i]));
  }
  CHECK(worst_closed <= 2.0 * grid.dt());
  CHECK(worst_truth <= 1e-12);
}

TEST_CASE("innovations equal the Brownians when the filter knows the truth") {
  ModelParams p = canonical_params();
  p.sigma_mu = 0.0;
  p.sigma0 = 0.0;
  p.rho = 0.0;
  p.V0 = p.theta;
  SimulationOptions zero;
  zero.noise = NoiseMode::Zero;
  const TimeGrid grid = TimeGrid::make(0.0, 1.0, 200);
  MarketPath path;
  simulate_path(p, grid, 0, 0, path, zero);
  const ObservedIncrements obs = observed_brownians(path, p, grid);
  const FilterOutput f = kalman_bucy_run(filter_dynamics(p), obs, grid, filter_prior(p));
  for (std::size_t i = 0; i < grid.n_steps; ++i) {
    CHECK(std::abs(f.dWbar1[i] - path.dW1[i]) <= 1e-15);
  }
  ObservedIncrements short_obs = obs;
  short_obs.dW1.pop_back();
  CHECK_THROWS_AS(kalman_bucy_run(filter_dynamics(p), short_obs, grid, filter_prior(p)),
                  DimensionError);
}

TEST_CASE("innovations round-trip and whiteness") {
  const ModelParams p = canonical_params();
  const TimeGrid grid = TimeGrid::make(0.0, 100.0, 100000);
  MarketPath path;
  simulate_path(p, grid, 21, 0, path);
  const ObservedIncrements obs = observed_brownians(path, p, grid);
  const FilterOutput f = kalman_bucy_run(filter_dynamics(p), obs, grid, filter_prior(p));
  const ObservedIncrements inn = innovations(f, obs);
  const double dt = grid.dt();
  double worst = 0.0;
  double s = 0.0;
  double s2 = 0.0;
  for (std::size_t i = 0; i < grid.n_steps; ++i) {
    worst = std::max(worst, std::abs(inn.dW1[i] + f.mu_bar[i] * dt - obs.dW1[i]));
    worst = std::max(worst, std::abs(inn.dW2[i] + f.beta_bar[i] * dt - obs.dW2[i]));
    CHECK(inn.dW1[i] == f.dWbar1[i]);
    s += inn.dW1[i] / std::sqrt(dt);
    s2 += inn.dW1[i] * inn.dW1[i] / dt;
  }
  const double n = static_cast<double>(grid.n_steps);
  CHECK(worst <= 1e-15);
  CHECK(std::abs(s / n) <= 5.0 / std::sqrt(n));
  CHECK(s2 / n >= 0.97);
  CHECK(s2 / n <= 1.03);

  FilterOutput zero = f;
  std::fill(zero.mu_bar.begin(), zero.mu_bar.end(), 0.0);
  std::fill(zero.beta_bar.begin(), zero.beta_bar.end(), 0.0);
  const ObservedIncrements same = innovations(zero, obs);
  CHECK(same.dW1 == obs.dW1);
  CHECK(same.dW2 == obs.dW2);
}

TEST_CASE("particle filter without observation coupling keeps uniform weights") {
  const ModelParams p = canonical_params();
  const TimeGrid grid = TimeGrid::make(0.0, 1.0, 100);
  MarketPath path;
  simulate_path(p, grid, 2, 0, path);
  const ObservedIncrements obs = observed_brownians(path, p, grid);
  ParticleOptions opt;
  opt.n_particles = 64;
  opt.couple_observations = false;
  const ParticleRun run = particle_ks_run(filter_dynamics(p), obs, grid, filter_prior(p), opt);
  for (double e : run.ess) CHECK(e == doctest::Approx(64.0).epsilon(1e-12));
  for (double w : run.cloud.weights) CHECK(w == doctest::Approx(1.0 / 64.0).epsilon(1e-12));
  CHECK(run.resample_count == 0);
}

TEST_CASE("single particle") {
  const ModelParams p = canonical_params();
  const TimeGrid grid = TimeGrid::make(0.0, 1.0, 100);
  MarketPath path;
  simulate_path(p, grid, 2, 0, path);
  const ObservedIncrements obs = observed_brownians(path, p, grid);
  ParticleOptions opt;
  opt.n_particles = 1;
  const ParticleRun run = particle_ks_run(filter_dynamics(p), obs, grid, filter_prior(p), opt);
  for (double e : run.ess) CHECK(e == 1.0);
  CHECK(run.output.mu_bar.back() == run.cloud.states[0][0]);
}

TEST_CASE("particle filter ignores slot order and matches Kalman-Bucy") {
  const ModelParams p = canonical_params();
  const TimeGrid grid = TimeGrid::make(0.0, 1.0, 200);
  MarketPath path;
  simulate_path(p, grid, 8, 0, path);
  const ObservedIncrements obs = observed_brownians(path, p, grid);
  const SignalDynamics dyn = filter_dynamics(p);
  ParticleOptions opt;
  opt.n_particles = 2000;
  opt.seed = 5;
  const ParticleRun a = particle_ks_run(dyn, obs, grid, filter_prior(p), opt);
  opt.slot_ids.resize(2000);
  std::iota(opt.slot_ids.rbegin(), opt.slot_ids.rend(), 0);
  const ParticleRun b = particle_ks_run(dyn, obs, grid, filter_prior(p), opt);
  CHECK(a.output.mu_bar == b.output.mu_bar);
  CHECK(a.output.beta_bar == b.output.beta_bar);

  const double total = std::accumulate(a.cloud.weights.begin(), a.cloud.weights.end(), 0.0);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  const FilterOutput kb = kalman_bucy_run(dyn, obs, grid, filter_prior(p));
  const double spread = std::sqrt(p.sigma0);
  CHECK(std::abs(a.output.mu_bar.back() - kb.mu_bar.back()) <= 5.0 * spread / std::sqrt(2000.0));
}

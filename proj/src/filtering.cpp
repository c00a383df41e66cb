#include "volfilter/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "volfilter/errors.hpp"
#include "volfilter/exact_sum.hpp"
#include "volfilter/hermite.hpp"
#include "volfilter/rng.hpp"

namespace volfilter {

SignalDynamics logou_filter_matrices(const ModelParams& params) {
  if (params.kind != ModelKind::LogOU) throw KindError("logou_filter_matrices needs a LogOU model");
  const double rb = rho_bar(params);
  const double r = params.rho / rb;
  SignalDynamics dyn;
  dyn.source = ModelKind::LogOU;
  dyn.A << -params.lambda_mu, 0.0,                                         //
      params.rho * (params.lambda_mu - params.lambda_V) / rb, -params.lambda_V;
  dyn.b << params.lambda_mu * params.theta_mu, -r * params.lambda_mu * params.theta_mu;
  dyn.G << params.sigma_mu, 0.0,  //
      -r * params.sigma_mu, 0.0;
  dyn.B << 0.0, 0.0,  //
      -r * params.lambda_V, -params.lambda_V;
  return dyn;
}

SignalDynamics garch_signal_dynamics(const ModelParams& params) {
  if (params.kind != ModelKind::GarchFactor) {
    throw KindError("garch_signal_dynamics needs a GarchFactor model");
  }
  if (params.theta != 0.0) throw ValidationError("theta", "GarchFactor requires theta = 0");
  const double rb = rho_bar(params);
  const double r = params.rho / rb;
  SignalDynamics dyn;
  dyn.source = ModelKind::GarchFactor;
  dyn.A << -params.lambda_mu, 0.0,  //
      r * (params.lambda_beta + params.lambda_mu), params.lambda_beta;
  dyn.b << params.lambda_mu * params.theta_mu, -r * params.lambda_mu * params.theta_mu;
  dyn.G << params.sigma_mu, 0.0,  //
      -r * params.sigma_mu, -params.sigma_beta / (rb * params.sigma_V);
  dyn.B.setZero();
  return dyn;
}

SignalDynamics filter_dynamics(const ModelParams& params) {
  switch (params.kind) {
    case ModelKind::LogOU:
      return logou_filter_matrices(params);
    case ModelKind::GarchFactor:
      return garch_signal_dynamics(params);
    default:
      throw KindError("no filter for model kind " + std::string(to_string(params.kind)));
  }
}

FilterPrior filter_prior(const ModelParams& params) {
  const double rb = rho_bar(params);
  const double c = -params.rho / rb;
  FilterPrior prior;
  if (params.kind == ModelKind::LogOU) {
    const double base = params.lambda_V * (params.theta - params.V0) / (params.sigma_V * rb);
    prior.mean << params.m0, base + c * params.m0;
    prior.cov << 1.0, c, c, c * c;
    prior.cov *= params.sigma0;
  } else if (params.kind == ModelKind::GarchFactor) {
    const double s = 1.0 / (rb * params.sigma_V);
    prior.mean << params.m0, -s * params.m1 + c * params.m0;
    prior.cov << params.sigma0, c * params.sigma0,  //
        c * params.sigma0, c * c * params.sigma0 + s * s * params.sigma1;
  } else {
    throw KindError("no filter prior for model kind " + std::string(to_string(params.kind)));
  }
  return prior;
}

Mat2 riccati_rhs(const SignalDynamics& dyn, const Mat2& theta) {
  const Mat2 gain = theta + dyn.B;
  Mat2 d = dyn.A * theta + theta * dyn.A.transpose() + dyn.G * dyn.G.transpose() -
           gain * gain.transpose() + dyn.B * dyn.B.transpose();
  return 0.5 * (d + d.transpose());
}

double riccati_residual(const SignalDynamics& dyn, const Mat2& theta) {
  return riccati_rhs(dyn, theta).cwiseAbs().maxCoeff();
}

Mat2 RiccatiPath::at(double t) const {
  if (!grid.contains(t)) throw RangeError("time outside the Riccati grid");
  const auto w = hermite_weights(grid, t);
  return hermite_eval<Mat2>(w, Theta, dTheta);
}

namespace {

double min_eigenvalue(const Mat2& m) {
  const double half_tr = 0.5 * (m(0, 0) + m(1, 1));
  const double half_diff = 0.5 * (m(0, 0) - m(1, 1));
  return half_tr - std::hypot(half_diff, m(0, 1));
}

}  // namespace

RiccatiPath riccati_theta(const SignalDynamics& dyn, const Mat2& theta0, const TimeGrid& grid) {
  if ((theta0 - theta0.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw DomainError("Theta0 must be symmetric");
  }
  if (min_eigenvalue(theta0) < -1e-10) throw DomainError("Theta0 must be positive semidefinite");
  RiccatiPath path;
  path.grid = grid;
  path.Theta.resize(grid.nodes());
  path.dTheta.resize(grid.nodes());
  const double dt = grid.dt();
  Mat2 th = 0.5 * (theta0 + theta0.transpose());
  path.Theta[0] = th;
  for (std::size_t i = 0; i < grid.n_steps; ++i) {
    const Mat2 k1 = riccati_rhs(dyn, th);
    const Mat2 k2 = riccati_rhs(dyn, th + 0.5 * dt * k1);
    const Mat2 k3 = riccati_rhs(dyn, th + 0.5 * dt * k2);
    const Mat2 k4 = riccati_rhs(dyn, th + dt * k3);
    path.dTheta[i] = k1;
    th += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    th = 0.5 * (th + th.transpose());
    if (!th.allFinite()) throw IntegrationError("Riccati solution is not finite");
    if (min_eigenvalue(th) < -1e-10) {
      throw IntegrationError("Riccati solution lost positive semidefiniteness at t = " +
                             std::to_string(grid.time(i + 1)));
    }
    path.Theta[i + 1] = th;
  }
  path.dTheta[grid.n_steps] = riccati_rhs(dyn, th);
  return path;
}

namespace {

using MatL = Eigen::Matrix<long double, 2, 2>;

MatL riccati_rhs_ld(const MatL& A, const MatL& GG, const MatL& B, const MatL& theta) {
  const MatL gain = theta + B;
  MatL d = A * theta + theta * A.transpose() + GG - gain * gain.transpose() + B * B.transpose();
  return 0.5L * (d + d.transpose());
}

std::vector<MatL> riccati_nodes_ld(const SignalDynamics& dyn, const Mat2& theta0, double T,
                                   std::size_t n) {
  const MatL A = dyn.A.cast<long double>();
  const MatL B = dyn.B.cast<long double>();
  const MatL GG = (dyn.G * dyn.G.transpose()).cast<long double>();
  const long double dt = static_cast<long double>(T) / static_cast<long double>(n);
  std::vector<MatL> out(n + 1);
  MatL th = theta0.cast<long double>();
  out[0] = th;
  for (std::size_t i = 0; i < n; ++i) {
    const MatL k1 = riccati_rhs_ld(A, GG, B, th);
    const MatL k2 = riccati_rhs_ld(A, GG, B, th + 0.5L * dt * k1);
    const MatL k3 = riccati_rhs_ld(A, GG, B, th + 0.5L * dt * k2);
    const MatL k4 = riccati_rhs_ld(A, GG, B, th + dt * k3);
    th += (dt / 6.0L) * (k1 + 2.0L * k2 + 2.0L * k3 + k4);
    th = 0.5L * (th + th.transpose());
    out[i + 1] = th;
  }
  return out;
}

}  // namespace

RiccatiConvergence riccati_self_convergence(const SignalDynamics& dyn, const Mat2& theta0,
                                            double T, const std::vector<std::size_t>& steps) {
  if (steps.size() < 2) throw DomainError("need at least two step counts");
  if (!(T > 0.0)) throw DomainError("horizon must be positive");
  std::vector<std::vector<MatL>> runs;
  for (std::size_t j = 0; j < steps.size(); ++j) {
    if (steps[j] == 0 || (j > 0 && steps[j] % steps[j - 1] != 0)) {
      throw DomainError("each step count must divide the next");
    }
    runs.push_back(riccati_nodes_ld(dyn, theta0, T, steps[j]));
  }
  RiccatiConvergence out;
  for (std::size_t j = 0; j + 1 < runs.size(); ++j) {
    const std::size_t stride = steps[j + 1] / steps[j];
    long double worst = 0.0L;
    for (std::size_t i = 0; i < runs[j].size(); ++i) {
      worst = std::max(worst, (runs[j][i] - runs[j + 1][i * stride]).cwiseAbs().maxCoeff());
    }
    out.diffs.push_back(static_cast<double>(worst));
  }
  for (std::size_t j = 0; j + 1 < out.diffs.size(); ++j) {
    out.orders.push_back(std::log2(out.diffs[j] / out.diffs[j + 1]));
  }
  return out;
}

RiccatiPath stationary_riccati(const SignalDynamics& dyn, const Mat2& theta0,
                               double steps_per_unit_time) {
  const Eigen::Vector2cd eig = dyn.A.eigenvalues();
  double rate = std::min(std::abs(eig[0].real()), std::abs(eig[1].real()));
  rate = std::max(rate, 0.1);
  const double horizon = 50.0 / rate;
  const auto n = static_cast<std::size_t>(std::ceil(horizon * steps_per_unit_time));
  return riccati_theta(dyn, theta0, TimeGrid::make(0.0, horizon, n));
}

KalmanBucyStepper::KalmanBucyStepper(const SignalDynamics& dyn,
                                     std::shared_ptr<const RiccatiPath> theta, const Vec2& mean0)
    : dyn_(dyn), theta_(std::move(theta)), dt_(theta_->grid.dt()), mean_(mean0) {}

Vec2 KalmanBucyStepper::step(std::size_t i, double dY1, double dY2) {
  const Vec2 innov(dY1 - mean_[0] * dt_, dY2 - mean_[1] * dt_);
  mean_ += dyn_.drift(mean_) * dt_ + (dyn_.B + theta_->Theta[i]) * innov;
  return innov;
}

FilterOutput kalman_bucy_run(const SignalDynamics& dyn, const ObservedIncrements& obs,
                             std::shared_ptr<const RiccatiPath> theta, const Vec2& mean0) {
  const TimeGrid& grid = theta->grid;
  const std::size_t n = grid.n_steps;
  if (obs.dW1.size() != n || obs.dW2.size() != n) {
    throw DimensionError("observation increments do not match the grid");
  }
  FilterOutput out;
  out.grid = grid;
  out.theta = theta;
  out.mu_bar.resize(n + 1);
  out.beta_bar.resize(n + 1);
  out.dWbar1.resize(n);
  out.dWbar2.resize(n);
  KalmanBucyStepper kb(dyn, theta, mean0);
  out.mu_bar[0] = mean0[0];
  out.beta_bar[0] = mean0[1];
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 innov = kb.step(i, obs.dW1[i], obs.dW2[i]);
    out.dWbar1[i] = innov[0];
    out.dWbar2[i] = innov[1];
    out.mu_bar[i + 1] = kb.mean()[0];
    out.beta_bar[i + 1] = kb.mean()[1];
  }
  return out;
}

FilterOutput kalman_bucy_run(const SignalDynamics& dyn, const ObservedIncrements& obs,
                             const TimeGrid& grid, const FilterPrior& prior) {
  auto theta = std::make_shared<const RiccatiPath>(riccati_theta(dyn, prior.cov, grid));
  return kalman_bucy_run(dyn, obs, std::move(theta), prior.mean);
}

namespace {

// Symmetric square root of a PSD 2x2 matrix (handles the rank-one priors).
Mat2 psd_sqrt(const Mat2& m) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(m);
  const Vec2 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct Particle {
  Vec2 x;
  double log_w;
  std::uint64_t id;
  NormalStream rng;
};

}  // namespace

ParticleRun particle_ks_run(const SignalDynamics& dyn, const ObservedIncrements& obs,
                            const TimeGrid& grid, const FilterPrior& prior,
                            const ParticleOptions& options) {
  const std::size_t n = grid.n_steps;
  const std::size_t N = options.n_particles;
  if (N < 1) throw DomainError("particle filter needs at least one particle");
  if (obs.dW1.size() != n || obs.dW2.size() != n) {
    throw DimensionError("observation increments do not match the grid");
  }
  if (!options.slot_ids.empty()) {
    std::vector<std::uint64_t> sorted = options.slot_ids;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t s = 0; s < N; ++s) {
      if (sorted.size() != N || sorted[s] != s) {
        throw DomainError("slot_ids must be a permutation of 0 .. N-1");
      }
    }
  }
  const double dt = grid.dt();
  const double sq_dt = std::sqrt(dt);
  const Mat2 L = psd_sqrt(prior.cov);
  const bool noise0 = dyn.G.col(0).squaredNorm() > 0.0;
  const bool noise1 = dyn.G.col(1).squaredNorm() > 0.0;
  const Mat2 drift_matrix = dyn.A - dyn.B;

  std::vector<Particle> cloud(N);
  for (std::size_t s = 0; s < N; ++s) {
    const std::uint64_t id = options.slot_ids.empty() ? s : options.slot_ids[s];
    NormalStream prior_rng(options.seed, StreamTag::ParticlePrior, id);
    const double z0 = prior_rng.normal();
    const double z1 = prior_rng.normal();
    cloud[s] = {prior.mean + L * Vec2(z0, z1), 0.0, id,
                NormalStream(options.seed, StreamTag::Particle, id, 0)};
  }

  ParticleRun run;
  FilterOutput& out = run.output;
  out.grid = grid;
  out.mu_bar.resize(n + 1);
  out.beta_bar.resize(n + 1);
  out.dWbar1.resize(n);
  out.dWbar2.resize(n);
  run.ess.resize(n);

  std::vector<double> w(N, 1.0 / static_cast<double>(N));
  auto weighted_mean = [&](std::size_t node) {
    ExactSum m0;
    ExactSum m1;
    for (std::size_t s = 0; s < N; ++s) {
      m0.add(w[s] * cloud[s].x[0]);
      m1.add(w[s] * cloud[s].x[1]);
    }
    out.mu_bar[node] = m0.value();
    out.beta_bar[node] = m1.value();
  };
  weighted_mean(0);

  std::uint64_t generation = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 dY(obs.dW1[i], obs.dW2[i]);
    out.dWbar1[i] = dY[0] - out.mu_bar[i] * dt;
    out.dWbar2[i] = dY[1] - out.beta_bar[i] * dt;
    const Vec2 obs_push = dyn.B * dY;
    double max_lw = -std::numeric_limits<double>::infinity();
    for (auto& p : cloud) {
      if (options.couple_observations) p.log_w += p.x.dot(dY) - 0.5 * p.x.squaredNorm() * dt;
      const double dm0 = noise0 ? sq_dt * p.rng.normal() : 0.0;
      const double dm1 = noise1 ? sq_dt * p.rng.normal() : 0.0;
      p.x += (drift_matrix * p.x + dyn.b) * dt + dyn.G * Vec2(dm0, dm1) + obs_push;
      max_lw = std::max(max_lw, p.log_w);
    }
    if (!std::isfinite(max_lw)) throw DegeneracyError("particle weights degenerated");
    ExactSum total;
    for (std::size_t s = 0; s < N; ++s) {
      cloud[s].log_w -= max_lw;
      w[s] = std::exp(cloud[s].log_w);
      total.add(w[s]);
    }
    const double z = total.value();
    if (!(z > 0.0)) throw DegeneracyError("all particle weights underflowed");
    ExactSum sq;
    for (std::size_t s = 0; s < N; ++s) {
      w[s] /= z;
      sq.add(w[s] * w[s]);
    }
    const double ess = std::clamp(1.0 / sq.value(), 1.0, static_cast<double>(N));
    run.ess[i] = ess;
    weighted_mean(i + 1);

    if (ess < options.resample_fraction * static_cast<double>(N)) {
      ++run.resample_count;
      ++generation;
      std::vector<std::size_t> order(N);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = cloud[a];
        const auto& pb = cloud[b];
        if (pa.x[0] != pb.x[0]) return pa.x[0] < pb.x[0];
        if (pa.x[1] != pb.x[1]) return pa.x[1] < pb.x[1];
        return pa.id < pb.id;
      });
      NormalStream pick(options.seed, StreamTag::Resample, generation);
      const double u0 = pick.uniform() / static_cast<double>(N);
      std::vector<Particle> next(N);
      double cum = 0.0;
      std::size_t src = 0;
      for (std::size_t k = 0; k < N; ++k) {
        const double u = u0 + static_cast<double>(k) / static_cast<double>(N);
        while (src + 1 < N && cum + w[order[src]] < u) {
          cum += w[order[src]];
          ++src;
        }
        next[k] = {cloud[order[src]].x, 0.0, k,
                   NormalStream(options.seed, StreamTag::Particle, k, generation)};
      }
      cloud = std::move(next);
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(N));
    }
  }

  run.cloud.states.resize(N);
  run.cloud.ids.resize(N);
  run.cloud.weights = w;
  ExactSum sq;
  for (std::size_t s = 0; s < N; ++s) {
    run.cloud.states[s] = cloud[s].x;
    run.cloud.ids[s] = cloud[s].id;
    sq.add(w[s] * w[s]);
  }
  run.cloud.ess = std::clamp(1.0 / sq.value(), 1.0, static_cast<double>(N));
  return run;
}

ObservedIncrements innovations(const FilterOutput& filter, const ObservedIncrements& obs) {
  const std::size_t n = filter.grid.n_steps;
  if (obs.dW1.size() != n || obs.dW2.size() != n || filter.mu_bar.size() != n + 1 ||
      filter.beta_bar.size() != n + 1) {
    throw DimensionError("filter and observations do not share a grid");
  }
  const double dt = filter.grid.dt();
  ObservedIncrements out;
  out.dW1.resize(n);
  out.dW2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.dW1[i] = obs.dW1[i] - filter.mu_bar[i] * dt;
    out.dW2[i] = obs.dW2[i] - filter.beta_bar[i] * dt;
  }
  return out;
}

}  // namespace volfilter

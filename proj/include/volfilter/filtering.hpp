#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "volfilter/models.hpp"
#include "volfilter/sde_sim.hpp"
#include "volfilter/time_grid.hpp"

namespace volfilter {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Signal X = (mu_tilde, beta_tilde):
//   dX = (A X + b) dt + G dM + B dW,   observation dY = X dt + dW,
// with M = (W3, W4) independent of W = (W1, W2).
struct SignalDynamics {
  Mat2 A = Mat2::Zero();
  Vec2 b = Vec2::Zero();
  Mat2 G = Mat2::Zero();
  Mat2 B = Mat2::Zero();
  bool affine = true;
  ModelKind source = ModelKind::LogOU;

  Vec2 drift(const Vec2& x) const { return A * x + b; }
};

SignalDynamics logou_filter_matrices(const ModelParams& params);
SignalDynamics garch_signal_dynamics(const ModelParams& params);
// Dispatches on params.kind; KindError for Heston/SteinStein.
SignalDynamics filter_dynamics(const ModelParams& params);

struct FilterPrior {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Zero();
};

// Gaussian prior of (mu_tilde_0, beta_tilde_0) implied by mu_0 ~ N(m0, sigma0),
// the known V0 and (GarchFactor) beta_0 ~ N(m1, sigma1).
FilterPrior filter_prior(const ModelParams& params);

// Symmetrized right-hand side AΘ + ΘAᵀ + GGᵀ − (Θ+B)(Θ+B)ᵀ + BBᵀ.
Mat2 riccati_rhs(const SignalDynamics& dyn, const Mat2& theta);
double riccati_residual(const SignalDynamics& dyn, const Mat2& theta);

struct RiccatiPath {
  TimeGrid grid;
  std::vector<Mat2> Theta;   // n_steps + 1 nodes
  std::vector<Mat2> dTheta;  // right-hand side at the nodes

  const Mat2& node(std::size_t i) const { return Theta[i]; }
  const Mat2& terminal() const { return Theta.back(); }
  // Cubic Hermite interpolation; RangeError outside the grid.
  Mat2 at(double t) const;
};

// Fixed-step RK4 with symmetrization after each step.
RiccatiPath riccati_theta(const SignalDynamics& dyn, const Mat2& theta0, const TimeGrid& grid);

// Self-convergence of the RK4 Riccati scheme on [0, T]: diffs[j] is the max
// node difference between the runs with steps[j] and steps[j + 1], compared on
// the nodes of the coarser run (each entry of steps must divide the next). The
// runs use long double so that roundoff stays below the truncation error.
struct RiccatiConvergence {
  std::vector<double> diffs;
  std::vector<double> orders;  // log2(diffs[j] / diffs[j + 1])
};

RiccatiConvergence riccati_self_convergence(const SignalDynamics& dyn, const Mat2& theta0,
                                            double T, const std::vector<std::size_t>& steps);

// Integrates to T = 50 / (slowest decay rate of A) to approximate the stationary Θ∞.
RiccatiPath stationary_riccati(const SignalDynamics& dyn, const Mat2& theta0,
                               double steps_per_unit_time = 200.0);

struct FilterOutput {
  TimeGrid grid;
  std::vector<double> mu_bar;    // n_steps + 1
  std::vector<double> beta_bar;  // n_steps + 1
  std::shared_ptr<const RiccatiPath> theta;
  std::vector<double> dWbar1;  // n_steps
  std::vector<double> dWbar2;
};

// Euler-Maruyama Kalman-Bucy recursion; the gain at step i is B + Θ(t_i).
class KalmanBucyStepper {
 public:
  KalmanBucyStepper(const SignalDynamics& dyn, std::shared_ptr<const RiccatiPath> theta,
                    const Vec2& mean0);

  // Consumes the observation increment of step i; returns the innovation.
  Vec2 step(std::size_t i, double dY1, double dY2);
  const Vec2& mean() const { return mean_; }

 private:
  SignalDynamics dyn_;
  std::shared_ptr<const RiccatiPath> theta_;
  double dt_;
  Vec2 mean_;
};

FilterOutput kalman_bucy_run(const SignalDynamics& dyn, const ObservedIncrements& obs,
                             const TimeGrid& grid, const FilterPrior& prior);
FilterOutput kalman_bucy_run(const SignalDynamics& dyn, const ObservedIncrements& obs,
                             std::shared_ptr<const RiccatiPath> theta, const Vec2& mean0);

struct ParticleCloud {
  std::vector<Vec2> states;
  std::vector<double> weights;
  std::vector<std::uint64_t> ids;
  double ess = 0.0;
};

struct ParticleOptions {
  std::size_t n_particles = 1000;
  std::uint64_t seed = 0;
  bool couple_observations = true;  // false sets h = 0 in the weight update
  double resample_fraction = 0.5;   // resample when ess < fraction * N
  // Optional initial placement: slot s holds the particle with id slot_ids[s].
  std::vector<std::uint64_t> slot_ids;
};

struct ParticleRun {
  FilterOutput output;
  ParticleCloud cloud;
  std::size_t resample_count = 0;
  std::vector<double> ess;  // after each update, n_steps entries
};

// Weighted-particle discretization of the Zakai equation normalized by the
// Kallianpur-Striebel formula. Particles follow the signal conditioned on the
// observation increments in the B channel. Reductions are exact, resampling
// acts on a state-sorted cloud and each particle owns its RNG substream, so the
// result does not depend on the slot order of the particles.
ParticleRun particle_ks_run(const SignalDynamics& dyn, const ObservedIncrements& obs,
                            const TimeGrid& grid, const FilterPrior& prior,
                            const ParticleOptions& options);

// dWbar = dW_tilde - estimate dt.
ObservedIncrements innovations(const FilterOutput& filter, const ObservedIncrements& obs);

}  // namespace volfilter

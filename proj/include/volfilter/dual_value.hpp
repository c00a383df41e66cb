#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "volfilter/filtering.hpp"
#include "volfilter/models.hpp"
#include "volfilter/time_grid.hpp"

namespace volfilter {

// How the filter covariance enters the value-function coefficients.
enum class ThetaMode {
  Stationary,   // converged Θ∞, time-homogeneous field
  TimeVarying,  // Θ(t) from the Riccati path
};

std::string_view to_string(ThetaMode mode);
ThetaMode theta_mode_from_string(std::string_view name);

// Coefficients of the state Y = (V, mu_bar) under the observation filtration:
//   dY = Gamma dt + Sigma dWbar,  Sigma = [K1 K2] column-wise,
//   row 1 = (rho k, rho_bar k), row 2 = (Θ11, Θ12).
class YField {
 public:
  YField(const ModelParams& params, ThetaMode mode, std::shared_ptr<const RiccatiPath> path,
         const Mat2& theta_inf, bool degenerate);

  const ModelParams& params() const { return params_; }
  ThetaMode mode() const { return mode_; }
  bool degenerate() const { return degenerate_; }
  const Mat2& theta_inf() const { return theta_inf_; }
  const std::shared_ptr<const RiccatiPath>& path() const { return path_; }

  Mat2 theta(double t) const;
  double psi(const Vec2& y) const { return y[1]; }
  Vec2 Gamma(const Vec2& y) const;
  Mat2 Sigma(double t, const Vec2& y) const;
  Vec2 K1(double t, const Vec2& y) const;
  Vec2 K2(double t, const Vec2& y) const;

 private:
  ModelParams params_;
  ThetaMode mode_;
  std::shared_ptr<const RiccatiPath> path_;
  Mat2 theta_inf_;
  bool degenerate_;
};

// Stationary mode takes Θ∞ = Θ(T) of `theta` and requires the last step of the
// path to have moved by less than 1e-8 (NotConvergedError otherwise) unless the
// path is identically zero, which is accepted with the degenerate flag set.
YField yfield_assemble(const ModelParams& params, std::shared_ptr<const RiccatiPath> theta,
                       ThetaMode mode);

// Bracket minimized over nu in the Hamiltonian of the power dual problem:
//   ½QᵀΣΣᵀQ − QᵀΓ + qψK1ᵀQ + qνK2ᵀQ + ½q(q−1)(ψ² + ν²).
double hamiltonian_bracket(double t, const Vec2& y, const Vec2& Q, double p, const YField& field,
                           double nu);
// Closed form ½Qᵀ(ΣΣᵀ − G)Q − QᵀF + Ψ.
double hamiltonian_power(double t, const Vec2& y, const Vec2& Q, double p, const YField& field);
// Log utility: −ΓᵀQ + ½ψ².
double hamiltonian_log(const Vec2& y, const Vec2& Q, const YField& field);
// Minimizer of hamiltonian_bracket: −K2ᵀQ / (q − 1).
double nu_from_gradient(double t, const Vec2& y, const Vec2& Q, double p, const YField& field);

enum class CoefficientForm {
  // ODEs obtained by substituting the separation ansatz into the semilinear PDE.
  Consistent,
  // Variant Ã and B̃ equations without the -1 and (T - t) terms; kept for comparison.
  AsPrinted,
};

struct CoeffPoint {
  double A_tilde, B_tilde, A_bar, B_bar, C_bar;
};

struct ValueCoeffs {
  TimeGrid grid;
  double p = 0.5;
  double q = -1.0;
  CoefficientForm form = CoefficientForm::Consistent;
  ThetaMode mode = ThetaMode::Stationary;
  // Series on the grid nodes and their time derivatives.
  std::vector<double> A_tilde, B_tilde, A_bar, B_bar, C_bar;
  std::vector<double> dA_tilde, dB_tilde, dA_bar, dB_bar, dC_bar;

  // Hermite interpolation; RangeError outside the grid.
  CoeffPoint at(double t) const;
};

// Integrates the coefficient ODEs backwards from zero terminal values with RK4.
ValueCoeffs solve_value_coeffs_logou(const ModelParams& params, double p, const YField& field,
                                     const TimeGrid& grid,
                                     CoefficientForm form = CoefficientForm::Consistent);

struct PhiValue {
  double phi;
  Vec2 grad;  // (∂v Φ, ∂m Φ)
};

// Φ = Ã v + B̃ − v (T − t) − Ā m² − B̄ m − C̄.
PhiValue phi_eval(const ValueCoeffs& coeffs, double t, double v, double m);

double nu_star(const ValueCoeffs& coeffs, const YField& field, double t, const Vec2& y);
// Zero for log utility; coeffs may be null in that case.
double nu_star(const UtilitySpec& utility, const ValueCoeffs* coeffs, const YField& field,
               double t, const Vec2& y);

using PhiFunction = std::function<double(double t, double v, double m)>;

// −Φ_t − ½Tr(ΣΣᵀD²Φ) + H(y, DΦ) by finite differences: central in v and m,
// central in t when [t − h, t + h] lies in `domain`, one-sided at its ends.
double pde_residual(const PhiFunction& phi, const YField& field, double p, const TimeGrid& domain,
                    double t, const Vec2& y, double h);
double pde_residual(const ValueCoeffs& coeffs, const YField& field, double t, const Vec2& y,
                    double h);
// Same with the log Hamiltonian.
double pde_residual_log(const PhiFunction& phi, const YField& field, const TimeGrid& domain,
                        double t, const Vec2& y, double h);

// −½∫ₜᵀ E[mu_bar_s²] ds for the log investor, from the mean and variance ODEs
// of the filter mean started at y = (v, m). T is the end of `grid`.
double phi_log_logou(const ModelParams& params, const RiccatiPath& theta, const TimeGrid& grid,
                     double t, const Vec2& y);

// J_dual(z) = g1(z) J̃ + g2(z) composed from Φ(0, Y0).
double dual_value(double z, const UtilitySpec& utility, double phi0);
// d/dz J_dual(z).
double dual_value_derivative(double z, const UtilitySpec& utility, double phi0);

struct LagrangeSolution {
  double z_x;
  double primal;  // inf_z [J_dual(z) + x z]
  double foc;     // |d/dz (J_dual + x z)| at z_x
};

// Golden-section search over log z followed by bisection on the first-order
// condition. ConvexityError when the sampled objective is not unimodal.
LagrangeSolution solve_lagrange_multiplier(double x, const UtilitySpec& utility, double phi0);

// Filter, Y-field and value coefficients of the power problem on `grid`.
// Stationary mode takes Θ∞ from a long Riccati run started at the prior
// covariance; TimeVarying mode uses the Riccati path on `grid` itself.
struct PowerProblem {
  SignalDynamics dyn;
  FilterPrior prior;
  std::shared_ptr<const RiccatiPath> theta;
  std::shared_ptr<const YField> field;
  std::shared_ptr<const ValueCoeffs> coeffs;
  double phi0 = 0.0;  // Φ(t0, V0, m0)
};

PowerProblem solve_power_problem(const ModelParams& params, double p, const TimeGrid& grid,
                                 ThetaMode mode,
                                 CoefficientForm form = CoefficientForm::Consistent);

// Φ_log(t0, V0, m0) with the Riccati path started at the prior covariance.
double solve_log_problem(const ModelParams& params, const TimeGrid& grid);

struct DualReport {
  UtilitySpec utility;
  double phi0 = 0.0;
  double J_dual(double z) const { return dual_value(z, utility, phi0); }
};

}  // namespace volfilter

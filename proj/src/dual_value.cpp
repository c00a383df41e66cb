#include "volfilter/dual_value.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "volfilter/errors.hpp"
#include "volfilter/hermite.hpp"

namespace volfilter {

std::string_view to_string(ThetaMode mode) {
  return mode == ThetaMode::Stationary ? "Stationary" : "TimeVarying";
}

ThetaMode theta_mode_from_string(std::string_view name) {
  if (name == "Stationary") return ThetaMode::Stationary;
  if (name == "TimeVarying") return ThetaMode::TimeVarying;
  throw KindError("unknown theta mode '" + std::string(name) + "'");
}

YField::YField(const ModelParams& params, ThetaMode mode, std::shared_ptr<const RiccatiPath> path,
               const Mat2& theta_inf, bool degenerate)
    : params_(params),
      mode_(mode),
      path_(std::move(path)),
      theta_inf_(theta_inf),
      degenerate_(degenerate) {}

Mat2 YField::theta(double t) const {
  if (mode_ == ThetaMode::Stationary) return theta_inf_;
  return path_->at(t);
}

Vec2 YField::Gamma(const Vec2& y) const {
  return {params_.lambda_V * (params_.theta - y[0]), params_.lambda_mu * (params_.theta_mu - y[1])};
}

Vec2 YField::K1(double t, const Vec2& y) const {
  const double k = model_coefficients(params_, y[0]).k;
  return {params_.rho * k, theta(t)(0, 0)};
}

Vec2 YField::K2(double t, const Vec2& y) const {
  const double k = model_coefficients(params_, y[0]).k;
  return {rho_bar(params_) * k, theta(t)(0, 1)};
}

Mat2 YField::Sigma(double t, const Vec2& y) const {
  Mat2 s;
  s.col(0) = K1(t, y);
  s.col(1) = K2(t, y);
  return s;
}

YField yfield_assemble(const ModelParams& params, std::shared_ptr<const RiccatiPath> theta,
                       ThetaMode mode) {
  if (params.kind != ModelKind::LogOU) throw KindError("the Y-field is assembled for LogOU only");
  if (!theta || theta->Theta.size() < 2) throw DomainError("Riccati path is empty");
  bool all_zero = true;
  for (const auto& th : theta->Theta) {
    if (th.cwiseAbs().maxCoeff() != 0.0) {
      all_zero = false;
      break;
    }
  }
  const Mat2& last = theta->Theta.back();
  if (mode == ThetaMode::Stationary && !all_zero) {
    const Mat2& prev = theta->Theta[theta->Theta.size() - 2];
    const double step = (last - prev).cwiseAbs().maxCoeff();
    if (!(step < 1e-8)) {
      throw NotConvergedError("Riccati path has not reached its stationary value (last step moved " +
                              std::to_string(step) + ")");
    }
  }
  return YField(params, mode, std::move(theta), last, all_zero);
}

double hamiltonian_bracket(double t, const Vec2& y, const Vec2& Q, double p, const YField& field,
                           double nu) {
  const double q = p / (p - 1.0);
  const Mat2 S = field.Sigma(t, y);
  const double psi = field.psi(y);
  const Vec2 k1 = S.col(0);
  const Vec2 k2 = S.col(1);
  return 0.5 * Q.dot(S * S.transpose() * Q) - Q.dot(field.Gamma(y)) + q * psi * k1.dot(Q) +
         q * nu * k2.dot(Q) + 0.5 * q * (q - 1.0) * (psi * psi + nu * nu);
}

double hamiltonian_power(double t, const Vec2& y, const Vec2& Q, double p, const YField& field) {
  const double q = p / (p - 1.0);
  const Mat2 S = field.Sigma(t, y);
  const double psi = field.psi(y);
  const Vec2 k1 = S.col(0);
  const Vec2 k2 = S.col(1);
  const Mat2 G = (q / (q - 1.0)) * k2 * k2.transpose();
  const Vec2 F = field.Gamma(y) - q * psi * k1;
  return 0.5 * Q.dot((S * S.transpose() - G) * Q) - Q.dot(F) + 0.5 * q * (q - 1.0) * psi * psi;
}

double hamiltonian_log(const Vec2& y, const Vec2& Q, const YField& field) {
  const double psi = field.psi(y);
  return -field.Gamma(y).dot(Q) + 0.5 * psi * psi;
}

double nu_from_gradient(double t, const Vec2& y, const Vec2& Q, double p, const YField& field) {
  const double q = p / (p - 1.0);
  return -field.K2(t, y).dot(Q) / (q - 1.0);
}

CoeffPoint ValueCoeffs::at(double t) const {
  if (!grid.contains(t)) throw RangeError("time outside the coefficient grid");
  const auto w = hermite_weights(grid, t);
  return {hermite_eval<double>(w, A_tilde, dA_tilde), hermite_eval<double>(w, B_tilde, dB_tilde),
          hermite_eval<double>(w, A_bar, dA_bar), hermite_eval<double>(w, B_bar, dB_bar),
          hermite_eval<double>(w, C_bar, dC_bar)};
}

namespace {

using State = std::array<double, 5>;  // Ã, B̃, Ā, B̄, C̄

State add_scaled(const State& y, double h, const State& k) {
  State out;
  for (std::size_t j = 0; j < 5; ++j) out[j] = y[j] + h * k[j];
  return out;
}

struct CoeffOde {
  const ModelParams& params;
  const YField& field;
  double q;
  double T;
  CoefficientForm form;

  State operator()(double t, const State& y) const {
    const double lv = params.lambda_V;
    const double sv = params.sigma_V;
    const double rho = params.rho;
    const double rb = rho_bar(params);
    const double kappa = q / (q - 1.0);
    const Mat2 th = field.theta(t);
    const double s11 = th(0, 0);
    const double s12 = th(0, 1);
    const double c = sv * sv * (1.0 - kappa * rb * rb);
    const double d = s11 * s11 + s12 * s12 * (1.0 - kappa);
    const double L = params.lambda_mu + q * s11;
    const double e = rho * sv * s11 + rb * sv * s12 * (1.0 - kappa);
    const double s2 = s11 * s11 + s12 * s12;
    const double lt = params.lambda_mu * params.theta_mu;
    const double tau = T - t;
    const double a = y[0] - tau;

    State dy;
    if (form == CoefficientForm::Consistent) {
      dy[0] = lv * y[0] - lv * tau - 1.0;
      dy[1] = 0.5 * c * a * a - lv * params.theta * a;
    } else {
      dy[0] = lv * y[0] - lv * tau;
      dy[1] = 0.5 * c * y[0] * y[0] - (c + lv * params.theta) * y[0] + 0.5 * c * tau * tau +
              lv * params.theta * tau;
    }
    dy[2] = -2.0 * d * y[2] * y[2] + 2.0 * L * y[2] - 0.5 * q * (q - 1.0);
    dy[3] = (L - 2.0 * d * y[2]) * y[3] - q * rho * sv * a + 2.0 * (e * a - lt) * y[2];
    dy[4] = -s2 * y[2] - 0.5 * d * y[3] * y[3] + (e * a - lt) * y[3];
    return dy;
  }
};

}  // namespace

ValueCoeffs solve_value_coeffs_logou(const ModelParams& params, double p, const YField& field,
                                     const TimeGrid& grid, CoefficientForm form) {
  if (params.kind != ModelKind::LogOU) throw KindError("value coefficients are LogOU only");
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("p", "power exponent must lie in (0, 1)");
  if (field.mode() == ThetaMode::TimeVarying) {
    const TimeGrid& rg = field.path()->grid;
    if (grid.t0 < rg.t0 || grid.T > rg.T) {
      throw RangeError("Riccati path does not cover the value grid");
    }
  }
  ValueCoeffs out;
  out.grid = grid;
  out.p = p;
  out.q = p / (p - 1.0);
  out.form = form;
  out.mode = field.mode();
  const std::size_t n = grid.n_steps;
  for (auto* v : {&out.A_tilde, &out.B_tilde, &out.A_bar, &out.B_bar, &out.C_bar, &out.dA_tilde,
                  &out.dB_tilde, &out.dA_bar, &out.dB_bar, &out.dC_bar}) {
    v->assign(n + 1, 0.0);
  }
  const CoeffOde f{params, field, out.q, grid.T, form};
  auto store = [&](std::size_t i, const State& y) {
    const State dy = f(grid.time(i), y);
    out.A_tilde[i] = y[0];
    out.B_tilde[i] = y[1];
    out.A_bar[i] = y[2];
    out.B_bar[i] = y[3];
    out.C_bar[i] = y[4];
    out.dA_tilde[i] = dy[0];
    out.dB_tilde[i] = dy[1];
    out.dA_bar[i] = dy[2];
    out.dB_bar[i] = dy[3];
    out.dC_bar[i] = dy[4];
  };
  const double h = -grid.dt();
  State y{0.0, 0.0, 0.0, 0.0, 0.0};
  store(n, y);
  for (std::size_t i = n; i > 0; --i) {
    const double t = grid.time(i);
    const State k1 = f(t, y);
    const State k2 = f(t + 0.5 * h, add_scaled(y, 0.5 * h, k1));
    const State k3 = f(t + 0.5 * h, add_scaled(y, 0.5 * h, k2));
    const State k4 = f(t + h, add_scaled(y, h, k3));
    for (std::size_t j = 0; j < 5; ++j) y[j] += (h / 6.0) * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    for (double v : y) {
      if (!std::isfinite(v) || std::abs(v) > 1e12) {
        throw IntegrationError("value coefficients blew up at t = " + std::to_string(t + h));
      }
    }
    store(i - 1, y);
  }
  return out;
}

PhiValue phi_eval(const ValueCoeffs& coeffs, double t, double v, double m) {
  const CoeffPoint c = coeffs.at(t);
  const double tau = coeffs.grid.T - t;
  const double phi = c.A_tilde * v + c.B_tilde - v * tau - c.A_bar * m * m - c.B_bar * m - c.C_bar;
  return {phi, Vec2(c.A_tilde - tau, -2.0 * c.A_bar * m - c.B_bar)};
}

double nu_star(const ValueCoeffs& coeffs, const YField& field, double t, const Vec2& y) {
  const PhiValue ph = phi_eval(coeffs, t, y[0], y[1]);
  return nu_from_gradient(t, y, ph.grad, coeffs.p, field);
}

double nu_star(const UtilitySpec& utility, const ValueCoeffs* coeffs, const YField& field,
               double t, const Vec2& y) {
  if (utility.kind == UtilityKind::Log) return 0.0;
  if (coeffs == nullptr) throw DomainError("power utility needs value coefficients");
  return nu_star(*coeffs, field, t, y);
}

namespace {

struct Derivatives {
  double phi_t;
  Vec2 grad;
  Mat2 hess;
};

Derivatives finite_differences(const PhiFunction& phi, const TimeGrid& domain, double t,
                               const Vec2& y, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  if (!domain.contains(t)) throw RangeError("residual point outside the time domain");
  const double v = y[0];
  const double m = y[1];
  Derivatives d;
  const bool back = t - h >= domain.t0;
  const bool fwd = t + h <= domain.T;
  if (back && fwd) {
    d.phi_t = (phi(t + h, v, m) - phi(t - h, v, m)) / (2.0 * h);
  } else if (fwd) {
    d.phi_t = (phi(t + h, v, m) - phi(t, v, m)) / h;
  } else if (back) {
    d.phi_t = (phi(t, v, m) - phi(t - h, v, m)) / h;
  } else {
    throw RangeError("time domain shorter than the finite-difference step");
  }
  const double f0 = phi(t, v, m);
  const double fvp = phi(t, v + h, m);
  const double fvm = phi(t, v - h, m);
  const double fmp = phi(t, v, m + h);
  const double fmm = phi(t, v, m - h);
  d.grad << (fvp - fvm) / (2.0 * h), (fmp - fmm) / (2.0 * h);
  const double cross =
      (phi(t, v + h, m + h) - phi(t, v + h, m - h) - phi(t, v - h, m + h) + phi(t, v - h, m - h)) /
      (4.0 * h * h);
  d.hess << (fvp - 2.0 * f0 + fvm) / (h * h), cross, cross, (fmp - 2.0 * f0 + fmm) / (h * h);
  return d;
}

double trace_term(const YField& field, double t, const Vec2& y, const Mat2& hess) {
  const Mat2 S = field.Sigma(t, y);
  return 0.5 * (S * S.transpose()).cwiseProduct(hess).sum();
}

}  // namespace

double pde_residual(const PhiFunction& phi, const YField& field, double p, const TimeGrid& domain,
                    double t, const Vec2& y, double h) {
  const Derivatives d = finite_differences(phi, domain, t, y, h);
  return -d.phi_t - trace_term(field, t, y, d.hess) + hamiltonian_power(t, y, d.grad, p, field);
}

double pde_residual(const ValueCoeffs& coeffs, const YField& field, double t, const Vec2& y,
                    double h) {
  const PhiFunction phi = [&coeffs](double s, double v, double m) {
    return phi_eval(coeffs, s, v, m).phi;
  };
  return pde_residual(phi, field, coeffs.p, coeffs.grid, t, y, h);
}

double pde_residual_log(const PhiFunction& phi, const YField& field, const TimeGrid& domain,
                        double t, const Vec2& y, double h) {
  const Derivatives d = finite_differences(phi, domain, t, y, h);
  return -d.phi_t - trace_term(field, t, y, d.hess) + hamiltonian_log(y, d.grad, field);
}

double phi_log_logou(const ModelParams& params, const RiccatiPath& theta, const TimeGrid& grid,
                     double t, const Vec2& y) {
  if (params.kind != ModelKind::LogOU) throw KindError("phi_log_logou is LogOU only");
  if (!grid.contains(t)) throw RangeError("time outside the grid");
  if (t < theta.grid.t0 || grid.T > theta.grid.T) {
    throw RangeError("Riccati path does not cover [t, T]");
  }
  const double span = grid.T - t;
  if (span <= 0.0) return 0.0;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / grid.dt() - 1e-9)));
  const double h = span / static_cast<double>(n);
  const double lm = params.lambda_mu;
  const double tm = params.theta_mu;
  // State (mean, variance, accumulated second moment).
  auto rhs = [&](double s, const std::array<double, 3>& z) {
    const Mat2 th = theta.at(std::min(s, theta.grid.T));
    return std::array<double, 3>{lm * (tm - z[0]),
                                 -2.0 * lm * z[1] + th(0, 0) * th(0, 0) + th(0, 1) * th(0, 1),
                                 z[0] * z[0] + z[1]};
  };
  auto axpy = [](const std::array<double, 3>& z, double a, const std::array<double, 3>& k) {
    return std::array<double, 3>{z[0] + a * k[0], z[1] + a * k[1], z[2] + a * k[2]};
  };
  std::array<double, 3> z{y[1], 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double s = t + static_cast<double>(i) * h;
    const auto k1 = rhs(s, z);
    const auto k2 = rhs(s + 0.5 * h, axpy(z, 0.5 * h, k1));
    const auto k3 = rhs(s + 0.5 * h, axpy(z, 0.5 * h, k2));
    const auto k4 = rhs(s + h, axpy(z, h, k3));
    for (std::size_t j = 0; j < 3; ++j) z[j] += (h / 6.0) * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return -0.5 * z[2];
}

double dual_value(double z, const UtilitySpec& utility, double phi0) {
  if (!(z > 0.0)) throw DomainError("dual variable must be positive");
  if (utility.kind == UtilityKind::Log) return -std::log(z) - 1.0 - phi0;
  const double q = utility.q();
  return -std::pow(z, q) / q * std::exp(-phi0);
}

double dual_value_derivative(double z, const UtilitySpec& utility, double phi0) {
  if (!(z > 0.0)) throw DomainError("dual variable must be positive");
  if (utility.kind == UtilityKind::Log) return -1.0 / z;
  const double q = utility.q();
  return -std::pow(z, q - 1.0) * std::exp(-phi0);
}

LagrangeSolution solve_lagrange_multiplier(double x, const UtilitySpec& utility, double phi0) {
  if (!(x > 0.0)) throw DomainError("initial wealth must be positive");
  auto f = [&](double s) {
    const double z = std::exp(s);
    return dual_value(z, utility, phi0) + x * z;
  };
  double lo = -40.0;
  double hi = 40.0;
  // Unimodality screen on a coarse sample.
  constexpr int kSamples = 161;
  std::vector<double> vals(kSamples);
  for (int i = 0; i < kSamples; ++i) vals[i] = f(lo + (hi - lo) * i / (kSamples - 1));
  const auto best = std::min_element(vals.begin(), vals.end()) - vals.begin();
  for (int i = 1; i <= best; ++i) {
    if (vals[i] > vals[i - 1] + 1e-12 * std::abs(vals[i - 1])) throw ConvexityError("dual objective not unimodal");
  }
  for (int i = static_cast<int>(best) + 1; i < kSamples; ++i) {
    if (vals[i] < vals[i - 1] - 1e-12 * std::abs(vals[i - 1])) throw ConvexityError("dual objective not unimodal");
  }
  if (best == 0 || best == kSamples - 1) throw ConvexityError("dual objective has no interior minimum");
  const double cell = (hi - lo) / (kSamples - 1);
  lo += cell * static_cast<double>(best - 1);
  hi = lo + 2.0 * cell;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-9; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  // The first-order condition is monotone in s; bisect it to machine precision.
  auto foc = [&](double s) { return dual_value_derivative(std::exp(s), utility, phi0) + x; };
  double left = a - 1e-6;
  double right = b + 1e-6;
  if (foc(left) > 0.0 || foc(right) < 0.0) throw ConvexityError("first-order condition not bracketed");
  for (int it = 0; it < 200 && right - left > 0.0; ++it) {
    const double mid = 0.5 * (left + right);
    if (mid == left || mid == right) break;
    (foc(mid) < 0.0 ? left : right) = mid;
  }
  const double s = 0.5 * (left + right);
  const double z = std::exp(s);
  return {z, dual_value(z, utility, phi0) + x * z, std::abs(foc(s))};
}

PowerProblem solve_power_problem(const ModelParams& params, double p, const TimeGrid& grid,
                                 ThetaMode mode, CoefficientForm form) {
  PowerProblem out;
  out.dyn = logou_filter_matrices(params);
  out.prior = filter_prior(params);
  out.theta = std::make_shared<const RiccatiPath>(
      mode == ThetaMode::Stationary ? stationary_riccati(out.dyn, out.prior.cov)
                                    : riccati_theta(out.dyn, out.prior.cov, grid));
  out.field = std::make_shared<const YField>(yfield_assemble(params, out.theta, mode));
  out.coeffs = std::make_shared<const ValueCoeffs>(
      solve_value_coeffs_logou(params, p, *out.field, grid, form));
  out.phi0 = phi_eval(*out.coeffs, grid.t0, params.V0, params.m0).phi;
  return out;
}

double solve_log_problem(const ModelParams& params, const TimeGrid& grid) {
  const SignalDynamics dyn = logou_filter_matrices(params);
  const FilterPrior prior = filter_prior(params);
  const RiccatiPath theta = riccati_theta(dyn, prior.cov, grid);
  return phi_log_logou(params, theta, grid, grid.t0, Vec2(params.V0, params.m0));
}

}  // namespace volfilter

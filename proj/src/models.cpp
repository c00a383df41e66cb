#include "volfilter/models.hpp"

#include <cmath>
#include <sstream>

#include "volfilter/errors.hpp"

namespace volfilter {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LogOU:
      return "LogOU";
    case ModelKind::GarchFactor:
      return "GarchFactor";
    case ModelKind::Heston:
      return "Heston";
    case ModelKind::SteinStein:
      return "SteinStein";
  }
  return "?";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "LogOU") return ModelKind::LogOU;
  if (name == "GarchFactor") return ModelKind::GarchFactor;
  if (name == "Heston") return ModelKind::Heston;
  if (name == "SteinStein") return ModelKind::SteinStein;
  throw KindError("unknown model kind '" + std::string(name) + "'");
}

bool is_factor_form(ModelKind kind) {
  return kind == ModelKind::LogOU || kind == ModelKind::GarchFactor;
}

bool uses_truncation(ModelKind kind) {
  return kind == ModelKind::Heston || kind == ModelKind::GarchFactor;
}

const ModelParams& validate_params(const ModelParams& p, ValidationMode mode) {
  auto finite = [](double x) { return std::isfinite(x); };
  const std::pair<const char*, double> all[] = {
      {"lambda_V", p.lambda_V}, {"theta", p.theta},         {"sigma_V", p.sigma_V},
      {"lambda_mu", p.lambda_mu}, {"theta_mu", p.theta_mu}, {"sigma_mu", p.sigma_mu},
      {"lambda_beta", p.lambda_beta}, {"sigma_beta", p.sigma_beta}, {"rho", p.rho},
      {"m0", p.m0},               {"sigma0", p.sigma0},     {"m1", p.m1},
      {"sigma1", p.sigma1},       {"S0", p.S0},             {"V0", p.V0}};
  for (const auto& [name, value] : all) {
    if (!finite(value)) throw ValidationError(name, "must be finite");
  }
  if (!(std::abs(p.rho) < 1.0)) throw ValidationError("rho", "must lie in (-1, 1)");
  if (mode == ValidationMode::Strict ? !(p.sigma_V > 0.0) : !(p.sigma_V >= 0.0)) {
    throw ValidationError("sigma_V", "must be positive");
  }
  if (p.lambda_V < 0.0) throw ValidationError("lambda_V", "must be nonnegative");
  if (p.lambda_mu < 0.0) throw ValidationError("lambda_mu", "must be nonnegative");
  if (p.sigma_mu < 0.0) throw ValidationError("sigma_mu", "must be nonnegative");
  if (p.sigma_beta < 0.0) throw ValidationError("sigma_beta", "must be nonnegative");
  if (p.sigma0 < 0.0) throw ValidationError("sigma0", "variance must be nonnegative");
  if (p.sigma1 < 0.0) throw ValidationError("sigma1", "variance must be nonnegative");
  if (!(p.S0 > 0.0)) throw ValidationError("S0", "must be positive");
  if (p.kind == ModelKind::GarchFactor && p.theta != 0.0) {
    throw ValidationError("theta", "GarchFactor requires theta = 0");
  }
  if (uses_truncation(p.kind) && !(p.V0 > 0.0)) {
    throw ValidationError("V0", "variance state must start positive");
  }
  if (p.kind == ModelKind::SteinStein && p.V0 == 0.0) {
    throw ValidationError("V0", "Stein-Stein volatility must start nonzero");
  }
  return p;
}

double rho_bar(const ModelParams& params) { return std::sqrt(1.0 - params.rho * params.rho); }

VolCoefficients model_coefficients(const ModelParams& params, double v) {
  switch (params.kind) {
    case ModelKind::LogOU:
      return {std::exp(v), params.sigma_V};
    case ModelKind::GarchFactor:
      if (!(v > 0.0)) throw DomainError("GarchFactor needs v > 0");
      return {std::sqrt(v), params.sigma_V * v};
    case ModelKind::Heston: {
      if (!(v > 0.0)) throw DomainError("Heston needs v > 0");
      const double s = std::sqrt(v);
      return {s, params.sigma_V * s};
    }
    case ModelKind::SteinStein:
      if (v == 0.0) throw DomainError("Stein-Stein volatility vanishes at v = 0");
      return {std::abs(v), params.sigma_V};
  }
  throw KindError("unhandled model kind");
}

double vol_drift(const ModelParams& params, double beta, double v) {
  if (params.kind == ModelKind::GarchFactor) return beta * (params.theta - v);
  return params.lambda_V * (params.theta - v);
}

Risks risks_from_state(const ModelParams& params, double v, double mu, double beta) {
  const auto [g, k] = model_coefficients(params, v);
  const double mu_tilde = is_factor_form(params.kind) ? mu : mu / g;
  const double beta_tilde =
      (vol_drift(params, beta, v) - params.rho * k * mu_tilde) / (rho_bar(params) * k);
  return {mu_tilde, beta_tilde};
}

double volatility_from_risks(const ModelParams& params, double mu_tilde, double beta_tilde) {
  if (params.kind != ModelKind::LogOU) throw KindError("volatility_from_risks is LogOU only");
  if (!(params.lambda_V > 0.0)) throw DomainError("lambda_V must be positive to invert");
  const double s = params.sigma_V / params.lambda_V;
  return -s * rho_bar(params) * beta_tilde - s * params.rho * mu_tilde + params.theta;
}

UtilitySpec UtilitySpec::power(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("p", "power exponent must lie in (0, 1)");
  return {UtilityKind::Power, p};
}

double UtilitySpec::q() const {
  if (kind != UtilityKind::Power) throw KindError("q is defined for power utility only");
  return p / (p - 1.0);
}

double UtilitySpec::U(double x) const {
  if (!(x > 0.0)) throw DomainError("utility needs positive wealth");
  return kind == UtilityKind::Log ? std::log(x) : std::pow(x, p) / p;
}

double UtilitySpec::U_dual(double z) const {
  if (!(z > 0.0)) throw DomainError("dual utility needs z > 0");
  if (kind == UtilityKind::Log) return -std::log(z) - 1.0;
  return -std::pow(z, q()) / q();
}

std::string UtilitySpec::describe() const {
  if (kind == UtilityKind::Log) return "Log";
  std::ostringstream out;
  out << "Power(p=" << p << ")";
  return out.str();
}

std::string_view to_string(UtilityKind kind) { return kind == UtilityKind::Log ? "Log" : "Power"; }

UtilityKind utility_kind_from_string(std::string_view name) {
  if (name == "Log") return UtilityKind::Log;
  if (name == "Power") return UtilityKind::Power;
  throw KindError("unknown utility kind '" + std::string(name) + "'");
}

ModelParams canonical_params() {
  ModelParams p;
  p.kind = ModelKind::LogOU;
  p.lambda_V = 1.0;
  p.theta = -1.6;
  p.sigma_V = 0.3;
  p.lambda_mu = 0.5;
  p.theta_mu = 0.1;
  p.sigma_mu = 0.3;
  p.rho = -0.5;
  p.m0 = 0.1;
  // Prior variance at the stationary filter variance, the positive root of
  // s^2 / rho_bar^2 + 2 lambda_mu s - sigma_mu^2 = 0, so Θ(t) = Θ∞ from the start.
  const double rb2 = 1.0 - p.rho * p.rho;
  p.sigma0 = rb2 * (std::sqrt(p.lambda_mu * p.lambda_mu + p.sigma_mu * p.sigma_mu / rb2) -
                    p.lambda_mu);
  p.S0 = 1.0;
  p.V0 = -1.6;
  return p;
}

double canonical_horizon() { return 1.0; }
double canonical_power() { return 0.5; }

}  // namespace volfilter

#pragma once

#include <string>
#include <string_view>

namespace volfilter {

enum class ModelKind { LogOU, GarchFactor, Heston, SteinStein };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

// Factor-form models write the stock return as e^V (mu dt + dW1) or sqrt(v) (mu dt + dW1),
// so the market price of risk equals mu. Heston and Stein-Stein use mu dt + g dW1.
bool is_factor_form(ModelKind kind);

// Heston and GarchFactor are simulated with full truncation of v at zero.
bool uses_truncation(ModelKind kind);

struct ModelParams {
  ModelKind kind = ModelKind::LogOU;
  double lambda_V = 1.0;
  double theta = 0.0;
  double sigma_V = 0.3;
  double lambda_mu = 0.5;
  double theta_mu = 0.1;
  double sigma_mu = 0.3;
  double lambda_beta = 0.0;  // GarchFactor only
  double sigma_beta = 0.0;   // GarchFactor only
  double rho = 0.0;
  double m0 = 0.0;      // prior mean of mu
  double sigma0 = 0.0;  // prior variance of mu
  double m1 = 0.0;      // prior mean of beta (GarchFactor)
  double sigma1 = 0.0;  // prior variance of beta (GarchFactor)
  double S0 = 1.0;
  double V0 = 0.0;
};

enum class ValidationMode {
  Strict,
  // Admits sigma_V = 0 for zero-noise verification runs.
  AllowDegenerate,
};

// Throws ValidationError naming the first failing field. Returns its argument.
const ModelParams& validate_params(const ModelParams& params,
                                   ValidationMode mode = ValidationMode::Strict);

double rho_bar(const ModelParams& params);

struct VolCoefficients {
  double g;  // stock volatility
  double k;  // vol-of-vol multiplier
};

// g(v), k(v). For truncated models v is clamped at zero first.
VolCoefficients model_coefficients(const ModelParams& params, double v);

// Drift f(beta, v) of the volatility factor. beta is only read for GarchFactor.
double vol_drift(const ModelParams& params, double beta, double v);

// Market price of risk mu_tilde and the second risk premium beta_tilde that
// makes W_tilde^2 a martingale under the observation filtration.
struct Risks {
  double mu_tilde;
  double beta_tilde;
};

Risks risks_from_state(const ModelParams& params, double v, double mu, double beta = 0.0);

// Inverse map for LogOU: V = -(sigma_V rho_bar / lambda_V) beta_tilde
//                            - (sigma_V rho / lambda_V) mu_tilde + theta.
double volatility_from_risks(const ModelParams& params, double mu_tilde, double beta_tilde);

enum class UtilityKind { Log, Power };

struct UtilitySpec {
  UtilityKind kind = UtilityKind::Log;
  double p = 0.0;  // Power only, p < 1 and p != 0

  static UtilitySpec log_utility() { return {UtilityKind::Log, 0.0}; }
  static UtilitySpec power(double p);

  // Conjugate exponent p / (p - 1).
  double q() const;
  double U(double x) const;
  // Convex dual U_tilde(z) = sup_x [U(x) - x z].
  double U_dual(double z) const;
  std::string describe() const;
};

std::string_view to_string(UtilityKind kind);
UtilityKind utility_kind_from_string(std::string_view name);

// Parameter set used by the verification harness and the acceptance suite. The
// prior variance of mu equals the stationary filter variance.
ModelParams canonical_params();
double canonical_horizon();
double canonical_power();

}  // namespace volfilter

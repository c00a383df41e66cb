#include <doctest.h>

#include <cmath>

#include "volfilter/errors.hpp"
#include "volfilter/models.hpp"

using namespace volfilter;

TEST_CASE("model coefficients") {
  ModelParams p;
  p.kind = ModelKind::LogOU;
  p.sigma_V = 0.3;
  const auto lo = model_coefficients(p, 0.0);
  CHECK(lo.g == 1.0);
  CHECK(lo.k == 0.3);

  p.kind = ModelKind::Heston;
  const auto he = model_coefficients(p, 0.04);
  CHECK(he.g == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(he.k == doctest::Approx(0.06).epsilon(1e-15));
  CHECK_THROWS_AS(model_coefficients(p, -0.01), DomainError);

  p.kind = ModelKind::SteinStein;
  CHECK(model_coefficients(p, -0.2).g == doctest::Approx(0.2));
  CHECK_THROWS_AS(model_coefficients(p, 0.0), DomainError);
}

TEST_CASE("risk premia") {
  ModelParams p;
  p.kind = ModelKind::LogOU;
  p.lambda_V = 1.0;
  p.theta = 0.0;
  p.sigma_V = 0.3;
  p.rho = 0.0;
  const Risks r0 = risks_from_state(p, 0.0, 0.1);
  CHECK(r0.mu_tilde == doctest::Approx(0.1));
  CHECK(r0.beta_tilde == 0.0);

  p.sigma_V = 0.2;
  p.rho = -0.5;
  const Risks r1 = risks_from_state(p, 0.1, 0.05);
  const double rb = std::sqrt(0.75);
  const double expect = -0.1 / (0.2 * rb) - (-0.5 / rb) * 0.05;
  CHECK(r1.beta_tilde == doctest::Approx(expect).epsilon(1e-14));
  CHECK(r1.beta_tilde == doctest::Approx(-0.54848).epsilon(1e-4));

  ModelParams g;
  g.kind = ModelKind::GarchFactor;
  g.theta = 0.0;
  g.sigma_V = 0.3;
  g.rho = 0.0;
  const Risks r2 = risks_from_state(g, 0.04, 0.1, 0.2);
  CHECK(r2.beta_tilde == doctest::Approx(-0.2 / 0.3).epsilon(1e-14));
}

TEST_CASE("LogOU volatility round-trips through the risk premia") {
  ModelParams p = canonical_params();
  for (double v : {-2.5, -1.6, -0.3, 0.4}) {
    for (double mu : {-0.2, 0.0, 0.15}) {
      const Risks r = risks_from_state(p, v, mu);
      CHECK(volatility_from_risks(p, r.mu_tilde, r.beta_tilde) == doctest::Approx(v).epsilon(1e-13));
    }
  }
  p.kind = ModelKind::Heston;
  CHECK_THROWS_AS(volatility_from_risks(p, 0.1, 0.1), KindError);
}

TEST_CASE("parameter validation") {
  ModelParams p = canonical_params();
  CHECK(&validate_params(p) == &p);

  ModelParams bad = p;
  bad.rho = 1.0;
  try {
    validate_params(bad);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "rho");
  }

  ModelParams garch = p;
  garch.kind = ModelKind::GarchFactor;
  garch.theta = 0.1;
  garch.V0 = 0.04;
  try {
    validate_params(garch);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "theta");
  }

  ModelParams flat = p;
  flat.sigma_V = 0.0;
  CHECK_THROWS_AS(validate_params(flat), ValidationError);
  CHECK_NOTHROW(validate_params(flat, ValidationMode::AllowDegenerate));

  ModelParams nan = p;
  nan.lambda_mu = std::nan("");
  CHECK_THROWS_AS(validate_params(nan), ValidationError);

  ModelParams heston = p;
  heston.kind = ModelKind::Heston;
  heston.theta = 0.04;
  heston.V0 = 0.0;
  CHECK_THROWS_AS(validate_params(heston), ValidationError);
}

TEST_CASE("utility and its convex dual") {
  const UtilitySpec lg = UtilitySpec::log_utility();
  CHECK(lg.U(std::exp(1.0)) == doctest::Approx(1.0));
  CHECK(lg.U_dual(1.0) == doctest::Approx(-1.0));

  const UtilitySpec pw = UtilitySpec::power(0.5);
  CHECK(pw.q() == doctest::Approx(-1.0));
  CHECK(pw.U(4.0) == doctest::Approx(4.0));
  CHECK(pw.U_dual(2.0) == doctest::Approx(0.5));  // -z^q / q
  CHECK_THROWS_AS(UtilitySpec::power(1.0), ValidationError);
  CHECK_THROWS_AS(UtilitySpec::power(0.0), ValidationError);

  // Fenchel inequality U(x) <= U_dual(z) + x z, tight at x = (U')^{-1}(z).
  for (const UtilitySpec& u : {lg, pw}) {
    for (double z : {0.3, 1.0, 2.5}) {
      const double x_star = u.kind == UtilityKind::Log ? 1.0 / z : std::pow(z, 1.0 / (u.p - 1.0));
      CHECK(u.U(x_star) == doctest::Approx(u.U_dual(z) + x_star * z).epsilon(1e-12));
      for (double x : {0.5, 1.0, 3.0}) CHECK(u.U(x) <= u.U_dual(z) + x * z + 1e-12);
    }
  }
}

TEST_CASE("canonical prior sits at the stationary filter variance") {
  const ModelParams p = canonical_params();
  const double rb2 = 1.0 - p.rho * p.rho;
  const double s = p.sigma0;
  CHECK(s * s / rb2 + 2.0 * p.lambda_mu * s - p.sigma_mu * p.sigma_mu ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(model_kind_from_string(to_string(p.kind)) == p.kind);
  CHECK_THROWS_AS(model_kind_from_string("Bates"), KindError);
}

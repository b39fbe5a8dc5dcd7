#include <cmath>
#include <random>
#include <stdexcept>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "rmkit/persistence.hpp"

using namespace rmkit;

namespace {

// Independent Lambda: Boost exp_sinh over the Gamma density.
double lambda_oracle(const ModelParams& p) {
  const double e2 = p.epsilon_sq();
  const double k = 2.0 / e2 - 1.0;
  const double th = 0.5 * e2 * p.kappa();
  boost::math::quadrature::exp_sinh<double> integrator;
  const double mean = integrator.integrate(
      [&](double x) {
        return x <= 0.0 ? 0.0 : x / (1.0 + x) * boost::math::gamma_p_derivative(k, x / th) / th;
      },
      1e-14);
  return mean - p.alpha();
}

}  // namespace

TEST(Lambda, ReferenceValues) {
  struct Row {
    double eps, alpha, kappa, lambda;
  };
  const Row rows[] = {{0.6, 0.3, 2.5, 0.339951294721892},
                      {0.6, 0.9, 2.5, -0.260048705278108},
                      {1.35, 0.6, 4.5, -0.478396406422052},
                      {0.01, 0.3, 2.5, 0.414268220756213},
                      {1.41, 0.5, 2.5, -0.493775249466752}};
  for (const auto& r : rows) {
    EXPECT_NEAR(lambda_invasion(ModelParams(r.eps, r.alpha, r.kappa)), r.lambda, 1e-9)
        << r.eps << " " << r.alpha << " " << r.kappa;
  }
}

TEST(Lambda, AgreesWithBoostOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ue(0.1, 1.35), ua(0.05, 0.95), uk(0.3, 8.0);
  for (int i = 0; i < 25; ++i) {
    const ModelParams p(ue(rng), ua(rng), uk(rng));
    EXPECT_NEAR(lambda_invasion(p), lambda_oracle(p), 1e-9)
        << p.epsilon() << " " << p.alpha() << " " << p.kappa();
  }
}

TEST(Lambda, SmallNoiseLimit) {
  const ModelParams p(1e-3, 0.3, 2.5);
  EXPECT_NEAR(lambda_invasion(p), 2.5 / 3.5 - 0.3, 1e-6);
}

TEST(Lambda, UndefinedAtCriticalNoise) {
  EXPECT_THROW(lambda_invasion(ModelParams(1.5, 0.3, 2.5)), std::domain_error);
  EXPECT_THROW(lambda_invasion(ModelParams::noiseless(0.3, 2.5)), std::domain_error);
}

TEST(Regime, Classification) {
  EXPECT_EQ(classify_regime(ModelParams(0.6, 0.3, 2.5)).regime, Regime::Persistence);
  const auto pe = classify_regime(ModelParams(0.6, 0.9, 2.5));
  EXPECT_EQ(pe.regime, Regime::PredatorExtinction);
  ASSERT_EQ(pe.rate_bounds.size(), 1U);
  EXPECT_TRUE(pe.rate_bounds[0].exact);
  EXPECT_DOUBLE_EQ(pe.rate_bounds[0].bound, *pe.lambda);

  const auto te = classify_regime(ModelParams(1.5, 0.6, 4.5));
  EXPECT_EQ(te.regime, Regime::TotalExtinction);
  EXPECT_FALSE(te.lambda.has_value());
  ASSERT_EQ(te.rate_bounds.size(), 2U);
  EXPECT_DOUBLE_EQ(te.rate_bounds[0].bound, 1.0 - 0.5 * 2.25);
  EXPECT_DOUBLE_EQ(te.rate_bounds[1].bound, -0.6);
}

TEST(Regime, CriticalBand) {
  const ModelParams p(0.6, 0.3, 2.5);
  EXPECT_EQ(classify_regime_from(p, 5e-7).regime, Regime::Critical);
  EXPECT_EQ(classify_regime_from(p, 2e-6).regime, Regime::Persistence);
  EXPECT_EQ(classify_regime(p, kCriticalBand, [](const ModelParams&) { return 0.0; }).regime,
            Regime::Critical);
  EXPECT_THROW(classify_regime_from(p, std::nullopt), std::invalid_argument);
  // eps = sqrt(2) may square to slightly above 2; either way it is not persistence.
  const double e = std::sqrt(2.0);
  const ModelParams crit(e, 0.3, 2.5);
  const auto r = classify_regime(crit);
  if (crit.epsilon_sq() == 2.0) {
    EXPECT_EQ(r.regime, Regime::Critical);
  } else {
    EXPECT_EQ(r.regime, Regime::TotalExtinction);
  }
}

TEST(Regime, ExtinctionBoundsRequireExtinction) {
  EXPECT_THROW(extinction_rate_bounds(ModelParams(0.6, 0.3, 2.5)), std::domain_error);
  EXPECT_EQ(extinction_rate_bounds(ModelParams(0.6, 0.9, 2.5)).size(), 1U);
}

TEST(Regime, ThresholdInAlpha) {
  // Lambda is affine in alpha, so the regime boundary sits at alpha = E[x/(1+x)].
  const ModelParams base(0.8, 0.3, 3.0);
  const double mean = lambda_invasion(base) + 0.3;
  EXPECT_EQ(classify_regime(base.with_alpha(mean - 1e-3)).regime, Regime::Persistence);
  EXPECT_EQ(classify_regime(base.with_alpha(mean + 1e-3)).regime, Regime::PredatorExtinction);
}

TEST(InvasionRate, PointwiseValues) {
  const ModelParams p(0.6, 0.3, 2.5);
  EXPECT_DOUBLE_EQ(invasion_rate_at(p, 1, State2(0.0, 0.0)), 1.0 - 0.18);
  EXPECT_DOUBLE_EQ(invasion_rate_at(p, 2, State2(0.0, 0.0)), -0.3);
  EXPECT_THROW(invasion_rate_at(p, 3, State2(0.0, 0.0)), std::invalid_argument);
}

TEST(Hofbauer, ExistsIffPersistence) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ue(0.1, 1.4), ua(0.05, 0.95), uk(0.5, 8.0);
  for (int i = 0; i < 40; ++i) {
    const ModelParams p(ue(rng), ua(rng), uk(rng));
    const auto w = hofbauer_weights(p);
    const bool persist = classify_regime(p).regime == Regime::Persistence;
    EXPECT_EQ(w.has_value(), persist);
    if (w) {
      EXPECT_GT(w->p1, 0.0);
      EXPECT_GT(w->p2, 0.0);
      EXPECT_GT(w->at_origin, 0.0);
      EXPECT_GT(w->at_prey_law, 0.0);
    }
  }
  EXPECT_FALSE(hofbauer_weights(ModelParams(1.5, 0.3, 2.5)).has_value());
}

TEST(Hofbauer, PreyLawAverageOfPreyRateVanishes) {
  // Under the prey-only law the prey's own invasion rate averages to zero,
  // so p . mu(lambda) reduces to p2 * Lambda.
  const ModelParams p(0.6, 0.3, 2.5);
  const auto w = hofbauer_weights(p);
  ASSERT_TRUE(w);
  EXPECT_NEAR(w->at_prey_law, w->p2 * lambda_invasion(p), 1e-9);
}

TEST(Lyapunov, ExponentialBelowAndAboveThreshold) {
  const ModelParams p(0.6, 0.3, 2.5);
  const double ts = exp_theta_star(p);
  EXPECT_DOUBLE_EQ(ts, 2.0 / (2.5 * 0.36));
  const auto good = lyapunov_exp_check(p, 0.5 * ts);
  EXPECT_TRUE(good.verified);
  EXPECT_GT(good.a, 0.0);
  EXPECT_TRUE(std::isfinite(good.b));
  const auto bad = lyapunov_exp_check(p, 2.0 * ts);
  EXPECT_FALSE(bad.verified);
  EXPECT_GT(bad.witness_value, 0.0);
  EXPECT_THROW(lyapunov_exp_check(p, 0.0), std::invalid_argument);
}

TEST(Lyapunov, PolynomialAllFourConditions) {
  const ModelParams p(0.6, 0.3, 2.5);
  const auto r = lyapunov_poly_check(p, 3.0);
  EXPECT_TRUE(r.verified);
  ASSERT_EQ(r.checks.size(), 4U);
  for (const auto& c : r.checks) EXPECT_TRUE(c.passed) << c.name;
  ASSERT_TRUE(r.c);
  EXPECT_DOUBLE_EQ(*r.c, 0.36 * 9.0);
  EXPECT_GT(r.constants.at("C"), 2.0 + 1.0 / 2.5 + 0.3);
  EXPECT_LT(r.constants.at("p0"), r.constants.at("p0_limit"));
  EXPECT_THROW(lyapunov_poly_check(p, 2.0), std::invalid_argument);
}

TEST(Lyapunov, PolynomialRejectsOversizedP0) {
  const ModelParams p(0.6, 0.3, 2.5);
  const auto r = lyapunov_poly_check(p, 3.0, 10.0);
  EXPECT_FALSE(r.verified);
  EXPECT_FALSE(r.checks[3].passed);
}

TEST(Lyapunov, CarreDuChampBound) {
  const ModelParams p(0.6, 0.3, 2.5);
  const auto poly = LyapunovFamily::polynomial(3.0);
  EXPECT_TRUE(check_carre_du_champ(p, poly, 0.36 * 9.0).passed);
  EXPECT_FALSE(check_carre_du_champ(p, poly, 0.5 * 0.36 * 9.0).passed);
  // Gamma(U)/U^2 along the prey axis approaches eps^2 n^2 from below.
  const double far = carre_du_champ_over_u2(p, poly, State2(1e4, 0.0));
  EXPECT_LT(far, 0.36 * 9.0);
  EXPECT_NEAR(far, 0.36 * 9.0, 1e-3);
  // The exponential family has Gamma(U)/U^2 = eps^2 theta^2 x1^2: unbounded.
  EXPECT_FALSE(check_carre_du_champ(p, LyapunovFamily::exponential(0.5), 100.0).passed);
}

TEST(FokkerPlanck, ResidualVanishes) {
  std::vector<double> grid;
  for (int i = 1; i <= 500; ++i) grid.push_back(0.02 * i);
  for (const auto& p : {ModelParams(0.6, 0.3, 2.5), ModelParams(1.35, 0.6, 4.5),
                        ModelParams(1.0, 0.3, 1.0)}) {
    EXPECT_LT(fokker_planck_residual(p, grid), 1e-12);
  }
  EXPECT_THROW(fokker_planck_residual(ModelParams(0.6, 0.3, 2.5), {0.0}), std::invalid_argument);
}

TEST(FokkerPlanck, WrongKappaLeavesResidual) {
  // The identity is specific to the Gamma law: a mismatched law fails it.
  std::vector<double> grid;
  for (int i = 1; i <= 200; ++i) grid.push_back(0.05 * i);
  const ModelParams p(0.6, 0.3, 2.5);
  const GammaStationary wrong(ModelParams(0.6, 0.3, 3.0));
  double worst = 0.0;
  for (double z : grid) {
    const double h = 1e-4 * z;
    auto flux = [&](double x) { return x * (1.0 - x / 2.5) * gamma_density(wrong, x); };
    auto diff = [&](double x) { return x * x * gamma_density(wrong, x); };
    const double lhs = -(flux(z + h) - flux(z - h)) / (2 * h) +
                       0.5 * p.epsilon_sq() * (diff(z + h) - 2 * diff(z) + diff(z - h)) / (h * h);
    worst = std::max(worst, std::fabs(lhs));
  }
  EXPECT_GT(worst, 1e-3);
}

TEST(Hormander, ClosedFormAgainstFiniteDifferences) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.05, 5.0);
  const ModelParams p(0.6, 0.3, 2.5);
  for (int i = 0; i < 50; ++i) {
    const State2 s(u(rng), u(rng));
    const double exact = hormander_det(p, s);
    EXPECT_GT(exact, 0.0);
    EXPECT_NEAR(hormander_det_numeric(p, s) / exact, 1.0, 1e-5);
  }
  EXPECT_EQ(hormander_det(p, State2(0.0, 1.0)), 0.0);
  EXPECT_EQ(hormander_det(p, State2(1.0, 0.0)), 0.0);
}

TEST(RateExponents, BranchesAndClosedForm) {
  // alpha/eps^2 = 0.6/0.36 = 1.667 > n/2 = 1.5: shifted branch.
  const auto hi = rate_exponents(ModelParams(0.6, 0.6, 10.0), 3.0);
  EXPECT_DOUBLE_EQ(hi.q0, 1.0 + 0.6 / (0.36 * 3.0));
  EXPECT_EQ(hi.split_branch, RateBranch::Shifted);
  EXPECT_DOUBLE_EQ(hi.split_bound, 1.5 + 0.6 / (2.0 * 0.36 * 3.0));
  EXPECT_DOUBLE_EQ(hi.q_max, std::min(hi.q0, 0.5 * (hi.q0 + 2.0)));
  EXPECT_DOUBLE_EQ(hi.q, 0.5 * (1.0 + hi.q_max));
  EXPECT_DOUBLE_EQ(hi.lambda_tv, hi.q - 1.0);
  EXPECT_DOUBLE_EQ(hi.a, 0.5 * 0.6 * 3.0);
  EXPECT_DOUBLE_EQ(hi.c, 0.36 * 9.0);

  // alpha/eps^2 = 0.3/0.36 = 0.833 < n/2: q0 branch.
  const auto lo = rate_exponents(ModelParams(0.6, 0.3, 10.0), 3.0);
  EXPECT_EQ(lo.split_branch, RateBranch::Q0);
  EXPECT_DOUBLE_EQ(lo.split_bound, lo.q0);
  EXPECT_DOUBLE_EQ(lo.q_max, lo.q0);
}

TEST(RateExponents, Preconditions) {
  EXPECT_THROW(rate_exponents(ModelParams(0.6, 0.3, 2.5), 2.0), std::invalid_argument);
  EXPECT_THROW(rate_exponents(ModelParams(0.6, 0.9, 2.5), 3.0), std::domain_error);
  EXPECT_THROW(rate_exponents(ModelParams(1.5, 0.3, 2.5), 3.0), std::domain_error);
}

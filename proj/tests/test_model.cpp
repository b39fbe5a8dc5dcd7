#include <cmath>
#include <limits>
#include <stdexcept>

#include <gtest/gtest.h>

#include "rmkit/model.hpp"

using namespace rmkit;

TEST(ModelParams, RejectsNonPositiveOrNonFinite) {
  EXPECT_THROW(ModelParams(0.0, 0.3, 2.5), std::invalid_argument);
  EXPECT_THROW(ModelParams(0.6, -0.1, 2.5), std::invalid_argument);
  EXPECT_THROW(ModelParams(0.6, 0.3, 0.0), std::invalid_argument);
  EXPECT_THROW(ModelParams(std::nan(""), 0.3, 2.5), std::invalid_argument);
  EXPECT_THROW(ModelParams(0.6, 0.3, std::numeric_limits<double>::infinity()),
               std::invalid_argument);
}

TEST(ModelParams, FlagsAndNoiselessReduction) {
  const ModelParams p(0.6, 1.2, 2.5);
  EXPECT_FALSE(p.alpha_admissible());
  EXPECT_TRUE(p.noise_subcritical());
  EXPECT_FALSE(ModelParams(1.5, 0.3, 2.5).noise_subcritical());

  const auto q = ModelParams::noiseless(0.3, 2.5);
  EXPECT_TRUE(q.is_noiseless());
  EXPECT_EQ(q.epsilon(), 0.0);
  EXPECT_TRUE(ModelParams(0.6, 0.3, 2.5).with_epsilon(0.0).is_noiseless());
  EXPECT_DOUBLE_EQ(q.with_alpha(0.5).alpha(), 0.5);
  EXPECT_TRUE(q.with_alpha(0.5).is_noiseless());
}

TEST(State2, ValidatesCoordinates) {
  EXPECT_THROW(State2(-1e-3, 1.0), std::invalid_argument);
  EXPECT_THROW(State2(1.0, std::nan("")), std::invalid_argument);
  EXPECT_TRUE(State2(0.0, 1.0).valid());
  EXPECT_FALSE(State2(0.0, 1.0).interior());
  EXPECT_TRUE(State2(0.1, 1.0).interior());
}

TEST(Drift, MatchesHandComputation) {
  const ModelParams p(0.6, 0.3, 2.5);
  const State2 s(1.0, 2.0);
  const auto d = drift(p, s);
  EXPECT_DOUBLE_EQ(d.a, 1.0 * (1.0 - 1.0 / 2.5 - 2.0 / 2.0));
  EXPECT_DOUBLE_EQ(d.b, 2.0 * (-0.3 + 0.5));
  const auto g = diffusion(p, s);
  EXPECT_DOUBLE_EQ(g.a, 0.6);
  EXPECT_EQ(g.b, 0.0);
}

TEST(Drift, ExtinctionSetIsInvariant) {
  const ModelParams p(0.6, 0.3, 2.5);
  for (double x : {0.0, 0.5, 3.0}) {
    EXPECT_EQ(drift(p, State2(0.0, x)).a, 0.0);
    EXPECT_EQ(drift(p, State2(x, 0.0)).b, 0.0);
    EXPECT_EQ(diffusion(p, State2(0.0, x)).a, 0.0);
  }
}

TEST(Drift, PredatorNullcline) {
  const ModelParams p(0.6, 0.3, 2.5);
  const double line = predator_nullcline(p);
  EXPECT_NEAR(predator_growth_rate(p, line), 0.0, 1e-15);
  EXPECT_LT(predator_growth_rate(p, 0.9 * line), 0.0);
  EXPECT_GT(predator_growth_rate(p, 1.1 * line), 0.0);
}

TEST(Logistic, DriftDiffusion) {
  const ModelParams p(0.6, 0.3, 2.5);
  const auto [f, g] = logistic_drift_diffusion(p, 1.0);
  EXPECT_DOUBLE_EQ(f, 1.0 - 1.0 / 2.5);
  EXPECT_DOUBLE_EQ(g, 0.6);
  EXPECT_THROW(logistic_drift_diffusion(p, -1.0), std::invalid_argument);
}

TEST(GammaStationary, ShapeScaleAndMoments) {
  for (const auto& p : {ModelParams(0.6, 0.3, 2.5), ModelParams(1.35, 0.6, 4.5),
                        ModelParams(0.01, 0.3, 2.5)}) {
    const GammaStationary g(p);
    const double e2 = p.epsilon_sq();
    const double k = p.kappa();
    EXPECT_DOUBLE_EQ(g.shape(), 2.0 / e2 - 1.0);
    EXPECT_DOUBLE_EQ(g.scale(), e2 * k / 2.0);
    const auto m = gamma_moments(g);
    EXPECT_NEAR(m.mean, k * (1.0 - e2 / 2.0), 1e-12 * k);
    EXPECT_NEAR(m.variance, k * k * e2 / 2.0 * (1.0 - e2 / 2.0), 1e-12 * k * k);
  }
}

TEST(GammaStationary, UndefinedAtOrAboveCriticalNoise) {
  EXPECT_THROW(GammaStationary(ModelParams(1.5, 0.3, 2.5)), std::domain_error);
  EXPECT_THROW(GammaStationary(ModelParams::noiseless(0.3, 2.5)), std::domain_error);
}

TEST(GammaStationary, DensityAtOrigin) {
  const GammaStationary below(ModelParams(1.35, 0.3, 2.5));  // k < 1
  const GammaStationary above(ModelParams(0.6, 0.3, 2.5));   // k > 1
  const GammaStationary unit(ModelParams(1.0, 0.3, 2.5));    // k = 1
  EXPECT_TRUE(std::isinf(gamma_density(below, 0.0)));
  EXPECT_EQ(gamma_density(above, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(gamma_density(unit, 0.0), 1.0 / unit.scale());
  EXPECT_NEAR(gamma_density(unit, 0.7), std::exp(-0.7 / unit.scale()) / unit.scale(), 1e-15);
}

TEST(Deterministic, PositiveEquilibriumIsStationary) {
  const ModelParams p(0.6, 0.3, 2.5);
  const auto eq = positive_equilibrium(p);
  ASSERT_TRUE(eq.has_value());
  const auto d = drift(p, *eq);
  EXPECT_NEAR(d.a, 0.0, 1e-14);
  EXPECT_NEAR(d.b, 0.0, 1e-14);
  EXPECT_FALSE(positive_equilibrium(ModelParams(0.6, 0.9, 2.5)).has_value());
}

TEST(Deterministic, RegimeTags) {
  // kappa = 2.5: thresholds (k-1)/(k+1) = 3/7 and k/(k+1) = 5/7.
  EXPECT_EQ(deterministic_regime(ModelParams(0.6, 0.3, 2.5)).tag, DeterministicTag::LimitCycle);
  EXPECT_EQ(deterministic_regime(ModelParams(0.6, 0.5, 2.5)).tag,
            DeterministicTag::StableCoexistence);
  EXPECT_EQ(deterministic_regime(ModelParams(0.6, 0.9, 2.5)).tag,
            DeterministicTag::PredatorExtinctEquilibrium);
  // ties
  EXPECT_EQ(deterministic_regime(ModelParams(0.6, 0.5, 3.0)).tag,
            DeterministicTag::StableCoexistence);
  EXPECT_EQ(deterministic_regime(ModelParams(0.6, 0.75, 3.0)).tag,
            DeterministicTag::PredatorExtinctEquilibrium);
  EXPECT_EQ(to_string(DeterministicTag::LimitCycle), "limit_cycle");
}

#include <cmath>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "rmkit/control.hpp"
#include "rmkit/parallel.hpp"

using namespace rmkit;

namespace {

const ModelParams kReach(0.6, 0.3, 0.5);

}  // namespace

TEST(Parabola, VertexIsMaximum) {
  for (double v : {0.5, 3.0, 10.0}) {
    const auto top = parabola_vertex(kReach, v);
    EXPECT_NEAR(parabola_x2(kReach, v, top.x1), top.x2, 1e-12 * top.x2);
    EXPECT_LT(parabola_x2(kReach, v, top.x1 - 0.1), top.x2);
    EXPECT_LT(parabola_x2(kReach, v, top.x1 + 0.1), top.x2);
  }
}

TEST(Parabola, ControlledPreyVelocityChangesSignOnCurve) {
  const double v = 3.0;
  const double x1 = 1.0;
  const double on = parabola_x2(kReach, v, x1);
  EXPECT_NEAR(control_field(kReach, v, State2(x1, on)).a, 0.0, 1e-12);
  EXPECT_GT(control_field(kReach, v, State2(x1, 0.5 * on)).a, 0.0);
  EXPECT_LT(control_field(kReach, v, State2(x1, 2.0 * on)).a, 0.0);
}

TEST(ChooseVstar, DefaultTargetValue) {
  const State2 z(1.0, 2.0);
  const double v = choose_vstar(kReach, z);
  EXPECT_NEAR(v, 2.885714, 1e-5);
  EXPECT_LE(v, 3.0);
  EXPECT_TRUE(detail::vstar_ok(kReach, z, v, 0.1));
  EXPECT_FALSE(detail::vstar_ok(kReach, z, 0.99 * v, 0.1));
  EXPECT_THROW(choose_vstar(kReach, State2(0.0, 1.0)), std::invalid_argument);
  EXPECT_THROW(choose_vstar(ModelParams(0.6, 1.2, 0.5), z), std::invalid_argument);
}

TEST(Reach, DefaultTargetWithFixedVstar) {
  ReachOptions opt;
  opt.vstar = 3.0;
  const State2 x(0.3, 0.3), z(1.0, 2.0);
  const auto r = reach(kReach, x, z, opt);
  ASSERT_TRUE(r.success) << r.diagnostic;
  EXPECT_EQ(r.failed_phase, 0);
  EXPECT_DOUBLE_EQ(r.vstar, 3.0);
  for (const auto& ph : r.phases) EXPECT_TRUE(ph.predicate_met) << ph.predicate;
  EXPECT_DOUBLE_EQ(r.phases[0].v, -1.0);
  EXPECT_DOUBLE_EQ(r.phases[1].v, 3.0);
  EXPECT_LT(r.phases[2].v, 0.0);
  const auto& end = r.trajectory.states.back();
  EXPECT_LE(std::hypot(end.x1 - z.x1, end.x2 - z.x2), r.r_z);
  EXPECT_TRUE(check_reach_invariants(kReach, r).ok());
  ASSERT_EQ(r.phase_of.size(), r.trajectory.size());
  EXPECT_EQ(r.phase_of.front(), 0);
  // Phases are contiguous in time.
  EXPECT_DOUBLE_EQ(r.phases[0].t_end, r.phases[1].t_start);
  EXPECT_DOUBLE_EQ(r.phases[1].t_end, r.phases[2].t_start);
}

TEST(Reach, DefaultTargetWithAutoVstar) {
  const auto r = reach(kReach, State2(0.3, 0.3), State2(1.0, 2.0), ReachOptions{});
  ASSERT_TRUE(r.success) << r.diagnostic;
  EXPECT_NEAR(r.vstar, 2.885714, 1e-5);
  EXPECT_TRUE(check_reach_invariants(kReach, r).ok());
}

TEST(Reach, AlreadyInsideTarget) {
  const auto r = reach(kReach, State2(1.0, 2.0), State2(1.05, 2.0), ReachOptions{});
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.trajectory.size(), 1U);
}

TEST(Reach, RejectsBoundaryPoints) {
  EXPECT_THROW(reach(kReach, State2(0.0, 0.3), State2(1.0, 2.0), ReachOptions{}),
               std::invalid_argument);
  EXPECT_THROW(reach(kReach, State2(0.3, 0.3), State2(1.0, 0.0), ReachOptions{}),
               std::invalid_argument);
}

TEST(Reach, RandomPairs) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::vector<std::pair<State2, State2>> pairs;
  for (int i = 0; i < 60; ++i) pairs.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
  const auto ok = parallel_map(pairs.size(), 0, [&](std::size_t i) {
    const auto r = reach(kReach, pairs[i].first, pairs[i].second, ReachOptions{});
    return r.success && check_reach_invariants(kReach, r).ok();
  });
  for (std::size_t i = 0; i < ok.size(); ++i) {
    EXPECT_TRUE(ok[i]) << "x=(" << pairs[i].first.x1 << "," << pairs[i].first.x2 << ") z=("
                       << pairs[i].second.x1 << "," << pairs[i].second.x2 << ")";
  }
}

TEST(Reach, LowTargetBelowOriginBall) {
  // z2 smaller than r0: needs the overshoot rule to shrink the origin ball.
  const auto r = reach(kReach, State2(2.0, 2.0), State2(1.40, 0.14), ReachOptions{});
  EXPECT_TRUE(r.success) << r.diagnostic;
  EXPECT_TRUE(check_reach_invariants(kReach, r).ok());
}

TEST(Invariants, DetectTamperedTrajectory) {
  auto r = reach(kReach, State2(0.3, 0.3), State2(1.0, 2.0), ReachOptions{});
  ASSERT_TRUE(r.success);
  // Reverse a phase-1 step: x1 must strictly decrease there.
  std::size_t i = 1;
  while (r.phase_of[i] != 1) ++i;
  std::swap(r.trajectory.states[i], r.trajectory.states[i + 1]);
  EXPECT_GT(check_reach_invariants(kReach, r).phase1_monotone, 0U);
}

TEST(ParallelMap, OrderAndExceptions) {
  const auto sq = parallel_map(100, 4, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(sq[i], i * i);
  EXPECT_THROW(parallel_map(10, 3,
                            [](std::size_t i) -> int {
                              if (i == 7) throw std::runtime_error("boom");
                              return 0;
                            }),
               std::runtime_error);
  EXPECT_TRUE(parallel_map(0, 2, [](std::size_t) { return 1; }).empty());
}

#include <gtest/gtest.h>

#include "rmkit/acceptance.hpp"

using namespace rmkit;

TEST(Acceptance, RegistryCoversThirteenCriteria) {
  const auto& all = acceptance::criteria();
  ASSERT_EQ(all.size(), 13U);
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i].id, static_cast<int>(i) + 1);
  EXPECT_EQ(criteria_for(ValidationLevel::Full).size(), 13U);
  EXPECT_EQ(criteria_for(ValidationLevel::Fast), (std::vector<int>{1, 2, 3, 4, 11, 12, 13}));
  EXPECT_THROW(parse_level("medium"), std::invalid_argument);
  EXPECT_THROW(run_criterion(99, {}), std::invalid_argument);
}

TEST(Acceptance, FastCriteriaPass) {
  for (int id : criteria_for(ValidationLevel::Fast)) {
    const auto r = run_criterion(id, {});
    EXPECT_TRUE(r.passed) << "[" << id << "] " << r.measured;
  }
}

TEST(Acceptance, TamperedLambdaFailsReferenceCriterion) {
  AcceptanceContext ctx;
  ctx.lambda = [](const ModelParams& p) { return lambda_invasion(p) + 0.05; };
  const auto r = run_criterion(1, ctx);
  EXPECT_FALSE(r.passed) << r.measured;
  EXPECT_FALSE(run_criterion(2, ctx).passed);
}

TEST(Acceptance, SeedsAreIndependentOfSchedule) {
  EXPECT_EQ(acceptance::path_seed(1, 2, 3), acceptance::path_seed(1, 2, 3));
  EXPECT_NE(acceptance::path_seed(1, 2, 3), acceptance::path_seed(1, 2, 4));
  EXPECT_NE(acceptance::path_seed(1, 2, 3), acceptance::path_seed(1, 3, 3));
}

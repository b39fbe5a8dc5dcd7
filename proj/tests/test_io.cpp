#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "rmkit/io.hpp"

using namespace rmkit;

TEST(Hash, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Hash, ConfigHashIgnoresKeyOrder) {
  json a = {{"alpha", 0.3}, {"epsilon", 0.6}};
  json b;
  b["epsilon"] = 0.6;
  b["alpha"] = 0.3;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b["alpha"] = 0.31;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Csv, TrajectoryRoundTripsAtFullPrecision) {
  Trajectory tr;
  tr.times = {0.0, 0.1};
  tr.states = {State2(1.0 / 3.0, 2.0), State2(0.1 + 0.2, 1e-300)};
  std::ostringstream os;
  write_trajectory_csv(os, tr, make_meta(json{{"k", 1}}, {"note here"}));
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# config_hash=", 0), 0U);
  std::getline(in, line);
  EXPECT_EQ(line, "# note here");
  std::getline(in, line);
  EXPECT_EQ(line, "t,x1,x2");
  std::getline(in, line);
  std::istringstream row(line);
  std::string cell;
  std::getline(row, cell, ',');
  std::getline(row, cell, ',');
  EXPECT_EQ(std::stod(cell), 1.0 / 3.0);
  std::getline(in, line);
  std::istringstream row2(line);
  std::getline(row2, cell, ',');
  std::getline(row2, cell, ',');
  EXPECT_EQ(std::stod(cell), 0.1 + 0.2);
  EXPECT_EQ(os.str().find('\r'), std::string::npos);
}

TEST(Csv, HistogramListsNonEmptyBins) {
  OccupationHistogram h;
  h.add(State2(1.0, 1.0), 2.0);
  h.add(State2(0.0, 500.0), 1.0);
  std::ostringstream os;
  write_histogram_csv(os, h);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "bin_x1_lo,bin_x1_hi,bin_x2_lo,bin_x2_hi,weight");
  int rows = 0;
  double total = 0.0;
  while (std::getline(in, line)) {
    ++rows;
    total += std::stod(line.substr(line.rfind(',') + 1));
  }
  EXPECT_EQ(rows, 2);
  EXPECT_DOUBLE_EQ(total, h.total_time());
  EXPECT_EQ(os.str().rfind("0,", 0), std::string::npos);  // header first
  EXPECT_NE(os.str().find(",inf,1\n"), std::string::npos);  // overflow bin in x2
}

TEST(Csv, ScalarSeries) {
  ScalarTrajectory s;
  s.times = {0.0, 1.0};
  s.values = {2.0, 3.0};
  std::ostringstream os;
  write_scalar_csv(os, s, "z");
  EXPECT_EQ(os.str(), "t,z\n0,2\n1,3\n");
}

TEST(Json, NonFiniteBecomesNull) {
  EXPECT_TRUE(num(std::nan("")).is_null());
  EXPECT_TRUE(num(INFINITY).is_null());
  EXPECT_EQ(num(1.5).get<double>(), 1.5);
}

TEST(Json, RegimeAndExponents) {
  const auto j = to_json(classify_regime(ModelParams(0.6, 0.9, 2.5)));
  EXPECT_EQ(j["regime"], "predator_extinction");
  EXPECT_NEAR(j["lambda"].get<double>(), -0.260048705278108, 1e-9);
  const auto e = to_json(rate_exponents(ModelParams(0.6, 0.6, 10.0), 3.0));
  EXPECT_EQ(e["split_branch"], "shifted");
}

TEST(WriteFile, FailsLoudly) {
  EXPECT_THROW(write_file("/nonexistent-dir/x.csv", "a"), std::runtime_error);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "aquid/units.hpp"

using namespace aquid;

namespace {

// Independent arithmetic from SI values (hbar, kB, u, a0), done in SI and converted at the end.
constexpr double kHbar = 1.054571817e-34, kKb = 1.380649e-23, kU = 1.66053906660e-27, kA0 = 5.29177210903e-11;
const double kMass = 86.909 * kU;

}  // namespace

TEST(Constants, MatchSiArithmetic) {
  const auto c = constants();
  EXPECT_NEAR(c.hbar_over_kB, kHbar / kKb * 1e9, 1e-15);
  EXPECT_NEAR(c.hbar_over_kB, 7.6382e-3, 1e-7);
  EXPECT_NEAR(c.hbar2_over_2mkB, kHbar * kHbar / (2 * kMass * kKb) * 1e9 * 1e12, 1e-12);
  // 2.788 quoted as a round figure; the arithmetic gives 2.7908
  EXPECT_NEAR(c.hbar2_over_2mkB, 2.788, 3e-3);
  EXPECT_NEAR(c.scattering_length_a, 98.98 * kA0 * 1e6, 1e-15);
  EXPECT_NEAR(c.scattering_length_a, 5.238e-3, 1e-6);
  EXPECT_DOUBLE_EQ(c.scattering_length_a, 98.98 * c.bohr_radius);
  EXPECT_NEAR(c.mass_m, kMass, 1e-40);
}

TEST(Coupling, ReferenceValueAndScaling) {
  const auto c = constants();
  const double wz = 2 * std::numbers::pi * 297.0;
  // SI oracle: g3D = 4 pi hbar^2 a/m (J m^3), times sqrt(m wz / (2 pi hbar)) (1/m) -> J m^2
  const double a = 98.98 * kA0;
  const double g_si = 4 * std::numbers::pi * kHbar * kHbar * a / kMass * std::sqrt(kMass * wz / (2 * std::numbers::pi * kHbar));
  const double g = coupling_2d(c, wz).g2d;
  EXPECT_NEAR(g, g_si / kKb * 1e9 * 1e12, 1e-12);
  EXPECT_NEAR(g, 0.2341, 2e-4);
  EXPECT_NEAR(coupling_2d(c, 4 * wz).g2d, 2 * g, 1e-14);
  auto c0 = c;
  c0.scattering_length_a = 0.0;
  EXPECT_EQ(coupling_2d(c0, wz).g2d, 0.0);
  EXPECT_THROW(coupling_2d(c, 0.0), std::invalid_argument);
}

TEST(Coupling, MonotoneInScatteringLengthAndTrapFrequency) {
  auto c = constants();
  double prev = 0.0;
  for (double wz = 100; wz < 1e4; wz *= 1.7) {
    const double g = coupling_2d(c, wz).g2d;
    EXPECT_GT(g, prev);
    prev = g;
  }
  prev = 0.0;
  for (double a = 1e-3; a < 1e-2; a += 1e-3) {
    c.scattering_length_a = a;
    const double g = coupling_2d(c, 1000.0).g2d;
    EXPECT_GT(g, prev);
    prev = g;
  }
}

TEST(RingFrequency, ReferenceValuesWithinConstantSetSpread) {
  const auto c = constants();
  EXPECT_NEAR(f0_one_dim(c, 3.85), 7.773, 0.015 * 7.773);
  EXPECT_NEAR(f0_one_dim(c, 4.82), 4.960, 0.015 * 4.960);
  EXPECT_NEAR(f0_one_dim(c, 8.00), 1.800, 0.015 * 1.800);
  EXPECT_NEAR(f0_one_dim(c, 3.85), kHbar / (2 * std::numbers::pi * kMass * 3.85e-6 * 3.85e-6), 1e-9);
  EXPECT_NEAR(f0_one_dim(c, 7.7), f0_one_dim(c, 3.85) / 4, 1e-14);
  EXPECT_THROW(f0_one_dim(c, -1.0), std::invalid_argument);
}

TEST(Scenario, ReferenceDocumentLoadsAndRoundTrips) {
  const auto s = reference_scenario(3.85, 3000, "row1");
  const auto back = load_scenario(serialize(s));
  EXPECT_EQ(back, s);
  EXPECT_EQ(serialize(back), serialize(s));
  EXPECT_DOUBLE_EQ(back.V0, 82.0);
  EXPECT_DOUBLE_EQ(back.box_half_length, 3.85 + 4 * 1.7065);
}

TEST(Scenario, RejectsInvariantViolations) {
  auto expect_reject = [](ScenarioConfig s, const std::string& needle) {
    try {
      load_scenario(serialize(s));
      FAIL() << "accepted: " << needle;
    } catch (const ScenarioError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  auto s = reference_scenario(3.85, 3000, "x");
  auto odd = s;
  odd.N = 3001;
  expect_reject(odd, "even");
  auto high = s;
  high.Vb = 90.0;
  expect_reject(high, "V0 > Vb");
  auto grid = s;
  grid.grid_points_per_axis = 128;
  expect_reject(grid, "odd");
  auto narrow = s;
  narrow.w = 5.0;
  expect_reject(narrow, "r0 > w");
}

TEST(Scenario, ParseErrorsAreReported) {
  EXPECT_THROW(load_scenario("{not json"), ScenarioError);
  EXPECT_THROW(load_scenario("[1,2]"), ScenarioError);
  auto j = to_json(reference_scenario(3.85, 3000, "x"));
  j["trap"].erase("r0_um");
  try {
    load_scenario(j.dump());
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("trap.r0_um"), std::string::npos);
  }
  j = to_json(reference_scenario(3.85, 3000, "x"));
  j["condensate"]["N"] = 3000.5;
  EXPECT_THROW(load_scenario(j.dump()), ScenarioError);
}

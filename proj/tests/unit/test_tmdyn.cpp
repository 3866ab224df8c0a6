#include <gtest/gtest.h>

#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "aquid/gp2d.hpp"
#include "aquid/tmdyn.hpp"

using namespace aquid;

namespace {

constexpr double kPi = std::numbers::pi;
const double kHbar = constants().hbar_over_kB;

// r0 = 3.85, N = 3000 row: I0/N and alpha0 at rest, U and P with their effective ratios.
constexpr double kI0 = 0.39067, kAlpha0 = -0.013321, kU = 0.01435, kUeffRatio = 0.8192, kP = -0.0462,
                 kPeffRatio = 0.01549;
constexpr int kN = 3000;
const double kK0 = 2 * kHbar * kI0;

GbhParams row(double f, double K, double P_eff) {
  GbhParams p;
  p.f_over_f0 = f;
  p.K = K;
  p.U = kU;
  p.P = kP;
  p.U_eff = kUeffRatio * kU;
  p.P_eff = P_eff;
  p.N = kN;
  return p;
}

GbhParams rest() { return row(0.0, kK0, -2 * kK0 * kAlpha0); }
GbhParams half() { return row(0.5, 0.0, kPeffRatio * kP); }

double shoelace(const std::vector<double>& x, const std::vector<double>& y) {
  double a = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t j = (i + 1) % x.size();
    a += x[i] * y[j] - x[j] * y[i];
  }
  return 0.5 * std::abs(a);
}

}  // namespace

TEST(TmEnergy, AlgebraicIdentities) {
  const auto p = row(0.2, 3e-3, -8e-4);
  EXPECT_NEAR(tm_energy(0, kPi, p) - tm_energy(0, 0, p), 2 * p.K, 1e-15);
  EXPECT_NEAR(tm_energy(1, 0.7, p), p.N * p.U_eff / 2, 1e-12);
  EXPECT_NEAR(tm_energy(-1, 2.1, p), p.N * p.U_eff / 2, 1e-12);
  for (double z : {-0.3, 0.01, 0.5})
    for (double ph : {-2.0, 0.3, 1.9}) {
      EXPECT_DOUBLE_EQ(tm_energy(z, ph, p), tm_energy(-z, ph, p));
      EXPECT_DOUBLE_EQ(tm_energy(z, ph, p), tm_energy(z, -ph, p));
    }
  EXPECT_THROW(tm_energy(1.01, 0.0, p), TmError);
}

TEST(TmEnergy, SmallDepartureQuadraticForm) {
  const auto p = row(0.2, 3e-3, -8e-4);
  const double e0 = tm_energy(0, 0, p);
  for (double h : {1e-2, 5e-3}) {
    // second differences: phi^2 coefficient (K - P_eff)/2, Z^2 coefficient (N U_eff + 2K - P_eff)/4
    const double cphi = (tm_energy(0, h, p) + tm_energy(0, -h, p) - 2 * e0) / (2 * h * h);
    EXPECT_NEAR(cphi, (p.K - p.P_eff) / 2, 1e-4 * (p.K - p.P_eff));
    const double cz = (tm_energy(h, 0, p) + tm_energy(-h, 0, p) - 2 * e0) / (2 * h * h);
    EXPECT_NEAR(cz, (p.N * p.U_eff + 2 * p.K - p.P_eff) / 4, 1e-5 * cz);
  }
}

TEST(TmRhs, StationaryPointsAndMaximumRate) {
  const auto p = row(0.45, 2e-4, -7e-4);
  const auto r0 = tm_rhs({0, 0, 0}, p);
  EXPECT_EQ(r0.zdot, 0.0);
  EXPECT_EQ(r0.phidot, 0.0);
  const double phs = std::acos(p.K / p.P_eff);
  EXPECT_NEAR(tm_rhs({0, phs, 0}, p).zdot, 0.0, 1e-12);
  EXPECT_NEAR(tm_rhs({0, -phs, 0}, p).zdot, 0.0, 1e-12);
  EXPECT_NEAR(tm_rhs({0.01, 0.0, 0}, p).phidot, p.N * p.U_eff * 0.01 / kHbar, 1e-12);

  const auto k0 = half();
  double best = 0.0, at = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double ph = kPi * i / 20000;
    const double v = std::abs(tm_rhs({0, ph, 0}, k0).zdot);
    if (v > best) best = v, at = ph;
  }
  EXPECT_NEAR(best, std::abs(k0.P_eff) / kHbar, 1e-9 * best);
  EXPECT_NEAR(std::min(at, kPi - at), kPi / 4, 1e-3);
  EXPECT_THROW(tm_rhs({1.0, 0, 0}, p), TmError);
}

TEST(IntegrateTm, EnergyDriftOverMillionSteps) {
  const auto p = rest();
  const double dt = default_tm_dt(p);
  const double T0 = tm_small_period(p.U_eff, p.K - p.P_eff, p.N);
  EXPECT_NEAR(dt, std::min(T0 / 500, 1e-4), 1e-18);
  const auto zc = *critical_imbalance(p).zero_mode;
  TmIntegrateOptions opt;
  opt.store_every = 1000;
  const auto tr = integrate_tm({0.7 * zc, 0.4, 0}, p, 1e6 * dt, dt, constants(), opt);
  ASSERT_EQ(tr.states.size(), 1001u);
  double drift = 0.0;
  for (double e : tr.energy) drift = std::max(drift, std::abs(e - tr.energy.front()));
  EXPECT_LT(drift / std::abs(tr.energy.front()), 1e-6);
}

TEST(IntegrateTm, SmallOscillationPeriod) {
  for (const auto& p : {rest(), half(), row(0.3, 2e-3, -9e-4)}) {
    const double T0 = tm_small_period(p.U_eff, p.K - p.P_eff, p.N);
    const double zc = std::sqrt(8 * std::max(std::abs(p.K), std::abs(p.P_eff)) / (p.N * p.U_eff));
    const double dt = default_tm_dt(p);
    const auto tr = integrate_tm({zc / 100, 0.0, 0.0}, p, 5 * T0, dt);
    std::vector<double> t, z;
    for (const auto& s : tr.states) t.push_back(s.t), z.push_back(s.z);
    EXPECT_NEAR(period_estimate(t, z), T0, 5e-3 * T0) << "K=" << p.K;
  }
}

TEST(IntegrateTm, SeedBeyondSeparatrixRuns) {
  const auto p = rest();
  const double zc = *critical_imbalance(p).zero_mode;
  const double dt = default_tm_dt(p);
  const double T0 = tm_small_period(p.U_eff, p.K - p.P_eff, p.N);
  const auto inside = integrate_tm({0.95 * zc, 0.0, 0.0}, p, 10 * T0, dt);
  double mx = 0.0;
  for (const auto& s : inside.states) mx = std::max(mx, std::abs(s.phi));
  EXPECT_LT(mx, kPi);
  const auto outside = integrate_tm({1.05 * zc, 0.0, 0.0}, p, 10 * T0, dt);
  EXPECT_GT(outside.states.back().phi, 4 * kPi);
  for (std::size_t i = 1; i < outside.states.size(); ++i) EXPECT_GE(outside.states[i].phi, outside.states[i - 1].phi);
}

TEST(IntegrateTm, PhaseSpaceAreaPreserved) {
  // ring in the canonical plane (calN = N Z/2, phi) around an off-equilibrium point
  const auto p = rest();
  const double zc = *critical_imbalance(p).zero_mode;
  const double dt = default_tm_dt(p);
  const double T0 = tm_small_period(p.U_eff, p.K - p.P_eff, p.N);
  const int M = 6000;
  std::vector<double> n0, f0, n1, f1;
  for (int i = 0; i < M; ++i) {
    const double a = 2 * kPi * i / M;
    const double z = 0.3 * zc + 0.1 * zc * std::cos(a), ph = 0.8 + 0.3 * std::sin(a);
    n0.push_back(p.N * z / 2);
    f0.push_back(ph);
    TmIntegrateOptions opt;
    opt.store_every = 1 << 30;
    const auto tr = integrate_tm({z, ph, 0}, p, 0.5 * T0, dt, constants(), opt);
    n1.push_back(p.N * tr.states.back().z / 2);
    f1.push_back(tr.states.back().phi);
  }
  const double a0 = shoelace(n0, f0), a1 = shoelace(n1, f1);
  // half a libration carries the ring to the other side of the well
  EXPECT_LT(f1[0], 0.0);
  EXPECT_NEAR(a1, a0, 1e-5 * a0);
}

TEST(IntegrateTm, RejectsBadInput) {
  EXPECT_THROW(integrate_tm({1.0, 0, 0}, rest(), 1.0, 1e-3), TmError);
  EXPECT_THROW(integrate_tm({0.1, 0, 0}, rest(), 1.0, 0.0), TmError);
}

TEST(ClassifyStationary, Cases) {
  auto find = [](const StationaryPointReport& r, double phi) {
    for (const auto& s : r.points)
      if (std::abs(s.phi - phi) < 1e-12) return s.kind;
    ADD_FAILURE() << "no point at " << phi;
    return PointKind::minimum;
  };
  const auto h = classify_stationary(half());
  ASSERT_EQ(h.points.size(), 4u);
  EXPECT_EQ(find(h, 0.0), PointKind::minimum);
  EXPECT_EQ(find(h, kPi), PointKind::minimum);
  EXPECT_EQ(find(h, kPi / 2), PointKind::saddle);
  EXPECT_EQ(find(h, -kPi / 2), PointKind::saddle);

  const auto below = classify_stationary(row(0.2, 4e-3, -7e-4));
  ASSERT_EQ(below.points.size(), 2u);
  EXPECT_EQ(find(below, 0.0), PointKind::minimum);
  EXPECT_EQ(find(below, kPi), PointKind::saddle);

  // bare P predicts a pi minimum at f = 0.253; the effective P_eff makes it a saddle
  const double K = kK0 * std::cos(kPi * 0.253);
  auto bare = row(0.253, K, kP);
  EXPECT_EQ(find(classify_stationary(bare), kPi), PointKind::minimum);
  auto eff = row(0.253, K, kPeffRatio * kP);
  EXPECT_EQ(find(classify_stationary(eff), kPi), PointKind::saddle);
}

TEST(CriticalImbalance, ReferenceExtremes) {
  const auto mx = critical_imbalance(rest());
  ASSERT_TRUE(mx.zero_mode);
  EXPECT_FALSE(mx.pi_mode);
  EXPECT_NEAR(*mx.zero_mode, 0.0368, 0.02 * 0.0368);
  EXPECT_NEAR(*mx.zero_mode, 0.03637, 0.025 * 0.03637);
  const auto mn = critical_imbalance(half());
  ASSERT_TRUE(mn.zero_mode && mn.pi_mode);
  EXPECT_EQ(*mn.zero_mode, *mn.pi_mode);
  EXPECT_NEAR(*mn.zero_mode, 0.0064, 0.02 * 0.0064);
  EXPECT_NEAR(*mn.zero_mode, 0.00626, 0.025 * 0.00626);
  EXPECT_THROW(critical_imbalance_inside(row(0.5, 0.0, 1e-4)), TmError);
  const auto neg = critical_imbalance(row(0.8, -3e-3, -5e-4));
  EXPECT_TRUE(neg.pi_mode);
  EXPECT_FALSE(neg.zero_mode);
}

TEST(CriticalImbalance, MatchesSeparatrixOfEnergyLevelSets) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> logk(-4.0, -2.0), sign(-1.0, 1.0), u(0.005, 0.02);
  std::uniform_int_distribution<int> n(1000, 5000);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    GbhParams p;
    p.K = std::copysign(std::pow(10.0, logk(rng)), sign(rng));
    p.P_eff = std::copysign(std::pow(10.0, logk(rng)), sign(rng));
    if (p.P_eff > 0 && p.P_eff > std::abs(p.K)) p.P_eff = -p.P_eff;
    p.U_eff = u(rng);
    p.N = 2 * (n(rng) / 2);
    if (std::abs(std::abs(p.K) - std::abs(p.P_eff)) < 1e-3 * std::abs(p.K)) continue;
    const auto ci = critical_imbalance(p);
    const auto pts = classify_stationary(p);
    double e_sep = 1e300;  // lowest saddle bounding the libration
    for (const auto& s : pts.points)
      if (s.kind == PointKind::saddle) e_sep = std::min(e_sep, tm_energy(0, s.phi, p));
    ASSERT_LT(e_sep, 1e300);
    auto check = [&](double phi_min, double zc) {
      auto g = [&](double z) { return tm_energy(z, phi_min, p) - e_sep; };
      std::uintmax_t it = 200;
      const auto r = boost::math::tools::toms748_solve(g, 0.0, 0.999, boost::math::tools::eps_tolerance<double>(50), it);
      const double z = 0.5 * (r.first + r.second);
      EXPECT_NEAR(zc, z, 5e-3 * z) << "K=" << p.K << " P=" << p.P_eff << " phi=" << phi_min;
      ++checked;
    };
    if (ci.zero_mode) check(0.0, *ci.zero_mode);
    if (ci.pi_mode) check(kPi, *ci.pi_mode);
  }
  EXPECT_GE(checked, 190);
}

TEST(CurrentParams, ReferenceRestFrame) {
  const auto jp = current_params(kK0, -2 * kK0 * kAlpha0);
  EXPECT_NEAR(jp.I0_per_N, kI0, 1e-12);
  EXPECT_NEAR(jp.alpha0, kAlpha0, 1e-12);
  EXPECT_LT(jp.alpha0, 0.0);
  EXPECT_NEAR(kK0, 5.97e-3, 1e-5);
  EXPECT_EQ(current_params(kK0, 0.0).alpha0, 0.0);
  EXPECT_THROW(current_params(0.0, 1e-4), TmError);
  // r0 = 8, N = 4000: alpha0 from the rest-frame K and P_eff
  const double K8 = 2 * kHbar * 0.01722;
  EXPECT_NEAR(current_params(K8, 2 * K8 * 0.0011648).alpha0, -0.0011648, 1e-12);
}

TEST(JunctionCurrent, ExtremalPhase) {
  const JunctionCurrentParams jp{kI0, kAlpha0};
  EXPECT_EQ(junction_current(0.0, jp), 0.0);
  const auto ex = extremal_junction_current(jp);
  EXPECT_NEAR(ex.max_abs_current, 0.39081, 0.005 * 0.39081);
  const double closed = std::acos(-1 / (8 * kAlpha0) - std::sqrt(0.5 + 1 / (64 * kAlpha0 * kAlpha0)));
  EXPECT_NEAR(ex.phi, closed, 1e-12);
  double brute = 0.0;
  for (int i = 0; i <= 100000; ++i) brute = std::max(brute, std::abs(junction_current(kPi * i / 100000, jp)));
  EXPECT_NEAR(ex.max_abs_current, brute, 1e-9);
  const auto pure = extremal_junction_current({kI0, 0.0});
  EXPECT_NEAR(pure.phi, kPi / 2, 1e-15);
  EXPECT_NEAR(pure.max_abs_current, kI0, 1e-15);
}

TEST(CriticalCurrentGbh, ReferenceExtremes) {
  const auto mn = critical_current_gbh(half());
  ASSERT_TRUE(mn.zero_mode && mn.pi_mode);
  EXPECT_NEAR(*mn.zero_mode, std::abs(half().P_eff) / (2 * kHbar), 1e-12);
  EXPECT_NEAR(*mn.zero_mode, 0.0469, 0.02 * 0.0469);
  EXPECT_NEAR(*mn.zero_mode, 0.04657, 0.025 * 0.04657);
  EXPECT_NEAR(*mn.pi_mode, *mn.zero_mode, 1e-15);

  const auto mx = critical_current_gbh(rest());
  ASSERT_TRUE(mx.zero_mode);
  EXPECT_FALSE(mx.pi_mode);
  EXPECT_NEAR(*mx.zero_mode, 0.7817, 1e-4);
  EXPECT_NEAR(*mx.zero_mode, 0.7799, 0.01 * 0.7799);
  EXPECT_NEAR(*mx.zero_mode, 2 * extremal_junction_current({kI0, kAlpha0}).max_abs_current, 1e-12);

  const auto sin_only = critical_current_gbh(row(0.1, 4e-3, 0.0));
  EXPECT_NEAR(*sin_only.zero_mode, 4e-3 / kHbar, 1e-12);
  EXPECT_NEAR(*sin_only.zero_phi, kPi / 2, 1e-12);
}

TEST(CriticalCurrentGbh, BruteForceMaximumOverEachLibration) {
  // inside the interval each mode's range is bounded by the saddle phase
  const auto p = row(0.47, 1.5e-4, -7e-4);
  const double phs = std::acos(p.K / p.P_eff);
  double b0 = 0.0, bpi = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double ph = kPi * i / 200000;
    const double v = std::abs(tm_rhs({0, ph, 0}, p).zdot) / 2;
    (ph < phs ? b0 : bpi) = std::max(ph < phs ? b0 : bpi, v);
  }
  const auto c = critical_current_gbh(p);
  EXPECT_NEAR(*c.zero_mode, b0, 1e-9 * b0);
  EXPECT_NEAR(*c.pi_mode, bpi, 1e-9 * bpi);
  EXPECT_GT(*c.zero_mode, *c.pi_mode);  // K > 0 favours the 0-mode
}

TEST(CriticalCurrentSagnac, Limits) {
  const JunctionCurrentParams jp{kI0, kAlpha0};
  EXPECT_NEAR(critical_current_sagnac({kI0, 0.0}, 0.5).exact, 0.0, 1e-15);
  EXPECT_NEAR(critical_current_sagnac(jp, 0.5).alpha0_limit, 0.0, 1e-15);
  EXPECT_NEAR(critical_current_sagnac({kI0, 0.0}, 0.0).exact, 2 * kI0, 1e-15);
  const auto at_half = critical_current_sagnac(jp, 0.5);
  EXPECT_GT(at_half.exact, 0.0);
  EXPECT_LT(at_half.exact, *critical_current_gbh(half()).zero_mode);
}

TEST(CriticalCurrentSagnac, AgreesWithGbhWhenPeffFollowsCos2) {
  // GBH parameters K0 cos(pi f), P_eff0 cos(2 pi f) make the two routes identical
  const auto jp = current_params(kK0, -2 * kK0 * kAlpha0);
  for (double f = 0.0; f <= 1.0; f += 0.02) {
    const auto p = row(f, kK0 * std::cos(kPi * f), -2 * kK0 * kAlpha0 * std::cos(2 * kPi * f));
    if (in_central_regime(p)) continue;
    const auto g = critical_current_gbh(p);
    const double v = g.zero_mode ? *g.zero_mode : *g.pi_mode;
    EXPECT_NEAR(critical_current_sagnac(jp, f).exact, v, 1e-12) << f;
  }
}

TEST(Interference, ReconstructsNetCurrent) {
  const auto jp = current_params(kK0, -2 * kK0 * kAlpha0);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> ph(-kPi, kPi), fr(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double f = fr(rng), phi = ph(rng);
    const int n = f > 0.5 ? 1 : 0;
    const auto p = row(f, kK0 * std::cos(kPi * f), -2 * kK0 * kAlpha0 * std::cos(2 * kPi * f));
    const auto lr = interference_decomposition(phi, sagnac_phase(f, n), jp, n);
    const double net = tm_rhs({0, phi, 0}, p).zdot / 2;
    EXPECT_NEAR(lr.I_l - lr.I_r, net, 1e-6 * std::max(std::abs(net), 1e-3));
  }
}

TEST(Interference, ConstructiveAndDestructiveCases) {
  const JunctionCurrentParams jp{kI0, kAlpha0};
  const double phi_c = *critical_current_gbh(rest()).zero_phi;
  const auto at_rest = interference_decomposition(phi_c, sagnac_phase(0.0, 0), jp, 0);
  EXPECT_NEAR(at_rest.I_l, -at_rest.I_r, 1e-15);
  EXPECT_GT(std::abs(at_rest.I_l), 0.3);
  // the sinusoidal part of the two junctions cancels where the 0-mode disappears
  const auto gone = interference_decomposition(0.9, sagnac_phase(0.5, 0), {kI0, 0.0}, 0);
  EXPECT_NEAR(gone.I_l, gone.I_r, 1e-15);
  for (double xi : {-2.0, 0.4, 3.0}) {
    const auto z = interference_decomposition(0.0, xi, jp, 0);
    EXPECT_EQ(z.I_l, z.I_r);
  }
}

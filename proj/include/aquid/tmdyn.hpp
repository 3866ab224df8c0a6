#pragma once

// Semiclassical two-mode (TM) dynamics with the modified parameters U_eff, P_eff: energy
// landscape, equations of motion, stationary points, critical imbalance and currents.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "aquid/gbh.hpp"
#include "aquid/units.hpp"

namespace aquid {

class TmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TmState {
  double z = 0.0;
  double phi = 0.0;
  double t = 0.0;
};

/// E_TM per particle, nK: N U_eff (1+Z^2)/4 - K sqrt(1-Z^2) cos(phi) + (P_eff/4)(1-Z^2) cos(2 phi).
inline double tm_energy(double z, double phi, const GbhParams& p) {
  if (std::abs(z) > 1.0) throw TmError("tm_energy: |Z| > 1");
  const double s = 1.0 - z * z;
  return 0.25 * p.N * p.U_eff * (1.0 + z * z) - p.K * std::sqrt(s) * std::cos(phi) + 0.25 * p.P_eff * s * std::cos(2.0 * phi);
}

struct TmRates {
  double zdot = 0.0;    // 1/s
  double phidot = 0.0;  // rad/s
};

/// hbar Zdot = -2K sqrt(1-Z^2) sin(phi) + P_eff (1-Z^2) sin(2 phi);  hbar phidot = N U_eff Z.
inline TmRates tm_rhs(const TmState& s, const GbhParams& p, const PhysConsts& c = constants()) {
  if (!(std::abs(s.z) < 1.0)) throw TmError("tm_rhs: |Z| must be below 1");
  const double hb = c.hbar_over_kB;
  const double q = 1.0 - s.z * s.z;
  return {(-2.0 * p.K * std::sqrt(q) * std::sin(s.phi) + p.P_eff * q * std::sin(2.0 * s.phi)) / hb,
          p.N * p.U_eff * s.z / hb};
}

struct TmTrajectory {
  std::vector<TmState> states;
  std::vector<double> energy;  // tm_energy at each stored state
};

struct TmIntegrateOptions {
  int store_every = 1;
  double fixed_point_tol = 1e-15;
  int fixed_point_max = 50;
};

/// Symmetric second-order symplectic integration of the canonical pair (calN = N Z / 2, phi)
/// under calH = N E_TM / hbar. The Hamiltonian is not separable in (calN, phi), so the
/// generalized Stormer-Verlet scheme is used: its two implicit stages are solved by fixed-point
/// iteration; for the separable small-Z Hamiltonian it reduces to explicit leapfrog.
inline TmTrajectory integrate_tm(const TmState& s0, const GbhParams& p, double t_final, double dt,
                                 const PhysConsts& c = constants(), const TmIntegrateOptions& opt = {}) {
  if (!(std::abs(s0.z) < 1.0)) throw TmError("integrate_tm: |Z0| must be below 1");
  if (!(dt > 0.0)) throw TmError("integrate_tm: dt must be positive");
  const double hb = c.hbar_over_kB;
  const int N = p.N;
  // dE/dZ and dE/dphi of the per-particle energy
  auto dE_dz = [&](double z, double phi) {
    const double s = 1.0 - z * z;
    return 0.5 * N * p.U_eff * z + p.K * z / std::sqrt(s) * std::cos(phi) - 0.5 * p.P_eff * z * std::cos(2.0 * phi);
  };
  auto dE_dphi = [&](double z, double phi) {
    const double s = 1.0 - z * z;
    return p.K * std::sqrt(s) * std::sin(phi) - 0.5 * p.P_eff * s * std::sin(2.0 * phi);
  };
  // d calN/dt = -(N/hbar) dE/dphi, dphi/dt = (2/hbar) dE/dZ, Z = 2 calN / N
  const double h = dt;
  TmTrajectory tr;
  TmState s = s0;
  tr.states.push_back(s);
  tr.energy.push_back(tm_energy(s.z, s.phi, p));
  const long steps = std::lround(t_final / dt);
  for (long k = 0; k < steps; ++k) {
    // calN_{1/2} = calN - h/2 dH/dphi(calN_{1/2}, phi)
    double zh = s.z;
    for (int it = 0; it < opt.fixed_point_max; ++it) {
      const double next = s.z - h / hb * dE_dphi(zh, s.phi);  // (2/N)(h/2)(N/hbar) = h/hbar
      if (!(std::abs(next) < 1.0)) throw TmError("integrate_tm: step rejected, |Z| reached 1");
      const bool done = std::abs(next - zh) <= opt.fixed_point_tol * std::max(1.0, std::abs(next));
      zh = next;
      if (done) break;
    }
    // phi_{n+1} = phi + h/2 [dH/dcalN(calN_{1/2}, phi) + dH/dcalN(calN_{1/2}, phi_{n+1})]
    const double a = dE_dz(zh, s.phi);
    double ph = s.phi + 2.0 * h / hb * a;
    for (int it = 0; it < opt.fixed_point_max; ++it) {
      const double next = s.phi + h / hb * (a + dE_dz(zh, ph));
      const bool done = std::abs(next - ph) <= opt.fixed_point_tol * std::max(1.0, std::abs(next));
      ph = next;
      if (done) break;
    }
    s.z = zh - h / hb * dE_dphi(zh, ph);
    if (!(std::abs(s.z) < 1.0)) throw TmError("integrate_tm: step rejected, |Z| reached 1");
    s.phi = ph;
    s.t = (k + 1) * dt;
    if ((k + 1) % opt.store_every == 0 || k + 1 == steps) {
      tr.states.push_back(s);
      tr.energy.push_back(tm_energy(s.z, s.phi, p));
    }
  }
  return tr;
}

/// dt = min(T0/500, 1e-4 s) with T0 the small-oscillation period about the stable mode.
inline double default_tm_dt(const GbhParams& p, const PhysConsts& c = constants()) {
  const double curv = std::max(p.K - p.P_eff, -p.K - p.P_eff);
  if (!(curv > 0.0)) return 1e-4;
  return std::min(tm_small_period(p.U_eff, curv, p.N, c) / 500.0, 1e-4);
}

enum class PointKind { minimum, saddle };

struct StationaryPoint {
  double phi = 0.0;
  PointKind kind = PointKind::minimum;
};

struct StationaryPointReport {
  std::vector<StationaryPoint> points;  // all with Z = 0
};

/// Stationary points at Z = 0. The Z-curvature N U_eff/2 is positive, so the kind follows the
/// sign of the phi-curvature: K - P_eff at 0, -K - P_eff at pi, (P_eff^2 - K^2)/P_eff at
/// +-arccos(K/P_eff).
inline StationaryPointReport classify_stationary(const GbhParams& p) {
  StationaryPointReport r;
  auto kind = [](double curv) { return curv > 0.0 ? PointKind::minimum : PointKind::saddle; };
  r.points.push_back({0.0, kind(p.K - p.P_eff)});
  r.points.push_back({std::numbers::pi, kind(-p.K - p.P_eff)});
  if (p.P_eff != 0.0 && std::abs(p.K / p.P_eff) < 1.0) {
    const double ph = std::acos(p.K / p.P_eff);
    const PointKind k = kind((p.P_eff * p.P_eff - p.K * p.K) / p.P_eff);
    r.points.push_back({ph, k});
    r.points.push_back({-ph, k});
  }
  return r;
}

/// True when f lies inside the central interval: |K/P_eff| < 1 with P_eff < 0.
inline bool in_central_regime(const GbhParams& p) { return p.P_eff < 0.0 && std::abs(p.K) < std::abs(p.P_eff); }

struct CriticalImbalance {
  std::optional<double> zero_mode;
  std::optional<double> pi_mode;
};

/// Z_c^+- = sqrt(-2 (P_eff -+ K)^2 / (P_eff N U_eff)) for the 0 (+) and pi (-) modes.
inline CriticalImbalance critical_imbalance_inside(const GbhParams& p) {
  if (!(p.P_eff < 0.0)) throw TmError("critical_imbalance: inside-interval branch requires P_eff < 0");
  const double d = -2.0 / (p.P_eff * p.N * p.U_eff);
  return {std::sqrt(d * (p.P_eff - p.K) * (p.P_eff - p.K)), std::sqrt(d * (p.P_eff + p.K) * (p.P_eff + p.K))};
}

/// Outside the central interval only the stable mode librates, with Z_c = sqrt(8|K|/(N U_eff)).
inline CriticalImbalance critical_imbalance(const GbhParams& p) {
  if (in_central_regime(p)) return critical_imbalance_inside(p);
  if (p.P_eff > 0.0 && std::abs(p.K) < p.P_eff)
    throw TmError("critical_imbalance: P_eff > |K| (minima away from 0 and pi) is not covered");
  const double zc = std::sqrt(8.0 * std::abs(p.K) / (p.N * p.U_eff));
  CriticalImbalance r;
  if (p.K >= 0.0) r.zero_mode = zc;
  else r.pi_mode = zc;
  return r;
}

struct JunctionCurrentParams {
  double I0_per_N = 0.0;  // 1/s
  double alpha0 = 0.0;
};

/// I0/N = K0/(2 hbar), alpha0 = -P_eff0/(2 K0), both at rest.
inline JunctionCurrentParams current_params(double K0, double P_eff0, const PhysConsts& c = constants()) {
  if (!(K0 > 0.0)) throw TmError("current_params: K0 must be positive");
  return {K0 / (2.0 * c.hbar_over_kB), -P_eff0 / (2.0 * K0)};
}

/// I_k = I0 [sin(phi_k) + alpha0 sin(2 phi_k)]
inline double junction_current(double phi_k, const JunctionCurrentParams& jp) {
  return jp.I0_per_N * (std::sin(phi_k) + jp.alpha0 * std::sin(2.0 * phi_k));
}

/// Cosines c in [-1, 1] of the stationary phases of a sin(phi) + b sin(2 phi):
/// 4 b c^2 + a c - 2 b = 0.
inline std::vector<double> extremal_cosines(double a, double b) {
  std::vector<double> out;
  if (b == 0.0) {
    out.push_back(0.0);
    return out;
  }
  const double r = a / (8.0 * b);
  const double root = std::sqrt(0.5 + r * r);
  for (double cc : {-r - root, -r + root})
    if (std::abs(cc) <= 1.0) out.push_back(cc);
  return out;
}

/// Phase in [0, pi] maximizing |sin(phi) + alpha0 sin(2 phi)| and the maximum of |I_k|.
struct ExtremalCurrent {
  double phi = 0.0;
  double max_abs_current = 0.0;  // per particle, 1/s
};

inline ExtremalCurrent extremal_junction_current(const JunctionCurrentParams& jp) {
  ExtremalCurrent best;
  for (double cc : extremal_cosines(1.0, jp.alpha0)) {
    const double ph = std::acos(cc);
    const double v = std::abs(junction_current(ph, jp));
    if (v > best.max_abs_current) best = {ph, v};
  }
  return best;
}

struct CriticalCurrent {
  std::optional<double> zero_mode;  // per particle, 1/s
  std::optional<double> pi_mode;
  std::optional<double> zero_phi;
  std::optional<double> pi_phi;
};

/// Ic/N = max |Zdot| / 2 along the libration of each existing mode at Z ~ 0. The candidate
/// phases arccos[K/(4P_eff) +- sqrt(1/2 + (K/(4P_eff))^2)] are assigned to the mode whose
/// libration range contains them.
inline CriticalCurrent critical_current_gbh(const GbhParams& p, const PhysConsts& c = constants()) {
  const double hb = c.hbar_over_kB;
  auto half_rate = [&](double ph) { return std::abs(-2.0 * p.K * std::sin(ph) + p.P_eff * std::sin(2.0 * ph)) / (2.0 * hb); };
  CriticalCurrent r;
  const auto cands = extremal_cosines(-2.0 * p.K, p.P_eff);
  if (in_central_regime(p)) {
    const double phs = std::acos(p.K / p.P_eff);
    for (double cc : cands) {
      const double ph = std::acos(cc);
      const double v = half_rate(ph);
      auto& slot = ph < phs ? r.zero_mode : r.pi_mode;
      auto& slot_phi = ph < phs ? r.zero_phi : r.pi_phi;
      if (!slot || v > *slot) {
        slot = v;
        slot_phi = ph;
      }
    }
    return r;
  }
  double best = 0.0, best_phi = 0.0;
  for (double cc : cands) {
    const double ph = std::acos(cc);
    const double v = half_rate(ph);
    if (v > best) {
      best = v;
      best_phi = ph;
    }
  }
  if (p.K >= 0.0) {
    r.zero_mode = best;
    r.zero_phi = best_phi;
  } else {
    r.pi_mode = best;
    r.pi_phi = best_phi;
  }
  return r;
}

struct SagnacCriticalCurrent {
  double exact = 0.0;    // per particle, 1/s
  double alpha0_limit = 0.0;  // 2 (I0/N) |cos(pi f/f0)|
  double phi = 0.0;
};

/// hbar Zdot = -4 hbar (I0/N) [cos(pi f/f0) sin(phi) + alpha0 cos(2 pi f/f0) sin(2 phi)],
/// Ic/N = max |Zdot| / 2.
inline SagnacCriticalCurrent critical_current_sagnac(const JunctionCurrentParams& jp, double f_over_f0) {
  const double a = std::cos(std::numbers::pi * f_over_f0);
  const double b = jp.alpha0 * std::cos(2.0 * std::numbers::pi * f_over_f0);
  SagnacCriticalCurrent r;
  for (double cc : extremal_cosines(a, b)) {
    const double ph = std::acos(cc);
    const double v = 2.0 * jp.I0_per_N * std::abs(a * std::sin(ph) + b * std::sin(2.0 * ph));
    if (v > r.exact) {
      r.exact = v;
      r.phi = ph;
    }
  }
  r.alpha0_limit = 2.0 * jp.I0_per_N * std::abs(a);
  return r;
}

struct JunctionPair {
  double I_l = 0.0;  // per particle, 1/s
  double I_r = 0.0;
};

/// phi_r = xi + phi - 2 n pi, phi_l = xi - phi.
inline JunctionPair interference_decomposition(double phi, double xi, const JunctionCurrentParams& jp, int n) {
  const double phr = xi + phi - 2.0 * n * std::numbers::pi;
  const double phl = xi - phi;
  return {junction_current(phl, jp), junction_current(phr, jp)};
}

/// Sagnac phase xi = 2 n pi - pi f/f0.
inline double sagnac_phase(double f_over_f0, int n) { return 2.0 * n * std::numbers::pi - std::numbers::pi * f_over_f0; }

}  // namespace aquid

#pragma once

// Localized junction modes, generalized Bose-Hubbard (GBH) parameter integrals and the
// period-based extraction of U_eff and P_eff.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "aquid/gp2d.hpp"

namespace aquid {

class GbhError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotMinimumError : public GbhError {
 public:
  using GbhError::GbhError;
};

struct GbhIntegrals {
  double K = 0.0;        // nK
  double U = 0.0;        // nK
  double P = 0.0;        // nK
  double P_prime = 0.0;  // nK
  double max_imag_ratio = 0.0;
};

struct GbhParams {
  double f_over_f0 = 0.0;
  double K = 0.0;
  double U = 0.0;
  double P = 0.0;
  double P_prime = 0.0;
  double U_eff = 0.0;
  double P_eff = 0.0;
  int N = 0;
};

/// psi_u = (Psi_0 - Psi_pi)/sqrt2, psi_l = (Psi_0 + Psi_pi)/sqrt2. The global phase of Psi_pi is
/// fixed so that its overlap with Psi_0 over the lower half plane is real and positive.
inline LocalizedModes localized_modes(const GpSolver& gp, const StationaryState& zero, const StationaryState& pi) {
  const Grid2D& g = gp.grid();
  if (!(zero.psi.grid == g) || !(pi.psi.grid == g)) throw GbhError("localized_modes: grid mismatch");
  if (zero.psi.omega != pi.psi.omega) throw GbhError("localized_modes: states at different rotation rates");
  const Field& a = zero.psi.psi;
  const Field& b = pi.psi.psi;
  const double ov = std::abs(inner(g, a, b));
  if (ov > 1e-3) throw GbhError("localized_modes: stationary states overlap " + std::to_string(ov) + " exceeds 1e-3");
  cplx lower_ov{0.0, 0.0};
  const int c = g.center();
  for (int iy = 0; iy < c; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      const auto i = g.index(ix, iy);
      lower_ov += std::conj(b[i]) * a[i];
    }
  const cplx rot = std::polar(1.0, std::arg(lower_ov));
  LocalizedModes m;
  m.omega = zero.psi.omega;
  m.upper.resize(a.size());
  m.lower.resize(a.size());
  const double s = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const cplx bp = rot * b[i];
    m.upper[i] = s * (a[i] - bp);
    m.lower[i] = s * (a[i] + bp);
  }
  normalize(g, m.upper);
  normalize(g, m.lower);
  double cu = 0.0, cl = 0.0;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      const auto i = g.index(ix, iy);
      cu += g.coord(iy) * std::norm(m.upper[i]);
      cl += g.coord(iy) * std::norm(m.lower[i]);
    }
  if (!(cu > 0.0) || !(cl < 0.0)) throw GbhError("localized_modes: mode centroids not in the expected half planes");
  return m;
}

/// K, U, P, P' from the localized modes at the modes' rotation rate.
inline GbhIntegrals gbh_integrals(const GpSolver& gp, const LocalizedModes& m, double imag_tol = 1e-8) {
  const Grid2D& g = gp.grid();
  const double gN = gp.gN();
  const int N = gp.config().N;
  Field h = gp.apply_h0(m.lower, m.omega);
  for (std::size_t i = 0; i < h.size(); ++i)
    h[i] += 0.5 * gN * (std::norm(m.upper[i]) + std::norm(m.lower[i])) * m.lower[i];
  const cplx k = -inner(g, m.upper, h);
  double u4 = 0.0, p4 = 0.0;
  cplx pp{0.0, 0.0};
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double nu = std::norm(m.upper[i]), nl = std::norm(m.lower[i]);
    u4 += nu * nu + nl * nl;
    p4 += nu * nl;
    pp += std::conj(m.upper[i] * m.upper[i]) * m.lower[i] * m.lower[i];
  }
  const double da = g.cell_area();
  GbhIntegrals out;
  out.K = k.real();
  out.U = 0.5 * (gN / N) * u4 * da;
  const cplx P = gN * pp * da;
  out.P = P.real();
  out.P_prime = gN * p4 * da;
  out.max_imag_ratio = std::max(std::abs(k.imag()) / std::max(std::abs(k), 1e-300),
                                std::abs(P.imag()) / std::max(std::abs(P), 1e-300));
  if (out.max_imag_ratio > imag_tol)
    throw GbhError("gbh_integrals: imaginary residue " + std::to_string(out.max_imag_ratio) + " above bound");
  return out;
}

/// (E_pi - E_0)/2
inline double k_from_energy_split(double e0, double epi) { return 0.5 * (epi - e0); }

/// Small-oscillation period of the TM Hamiltonian about a minimum with curvature coefficient
/// c = K - P (0-mode) or -K - P (pi-mode): T = pi hbar / sqrt(N U c / 2).
inline double tm_small_period(double U, double curvature, int N, const PhysConsts& c = constants()) {
  if (!(U * curvature > 0.0)) throw NotMinimumError("tm_small_period: not a minimum");
  return std::numbers::pi * c.hbar_over_kB / std::sqrt(0.5 * N * U * curvature);
}

/// U_eff = 2 pi^2 hbar^2 / (N T0^2 (K - P)).
inline double u_eff_from_period(double T0, double K, double P, int N, const PhysConsts& c = constants()) {
  if (!(K > P)) throw GbhError("u_eff_from_period: requires K > P");
  if (!(T0 > 0.0)) throw GbhError("u_eff_from_period: requires T0 > 0");
  const double hb = c.hbar_over_kB;
  return 2.0 * std::numbers::pi * std::numbers::pi * hb * hb / (N * T0 * T0 * (K - P));
}

struct PeffEstimate {
  std::optional<double> zero_mode;  // from T_+
  std::optional<double> pi_mode;    // from T_-
  double value = 0.0;
  double spread = 0.0;  // |difference| / |mean| when both exist
};

/// P_eff = +-K - 2 pi^2 hbar^2 / (N U_eff T_+-^2). Pass only the periods of modes that were
/// found to oscillate; a non-positive or non-finite period marks the mode as not a minimum.
inline PeffEstimate p_eff_from_periods(std::optional<double> T_plus, std::optional<double> T_minus, double K,
                                       double U_eff, int N, const PhysConsts& c = constants()) {
  if (!T_plus && !T_minus) throw GbhError("p_eff_from_periods: no period supplied");
  if (!(U_eff > 0.0)) throw GbhError("p_eff_from_periods: U_eff must be positive");
  const double hb = c.hbar_over_kB;
  const double a = 2.0 * std::numbers::pi * std::numbers::pi * hb * hb / (N * U_eff);
  PeffEstimate out;
  if (T_plus) {
    if (!(*T_plus > 0.0) || !std::isfinite(*T_plus)) throw NotMinimumError("p_eff_from_periods: 0-mode is not a minimum");
    out.zero_mode = K - a / (*T_plus * *T_plus);
  }
  if (T_minus) {
    if (!(*T_minus > 0.0) || !std::isfinite(*T_minus)) throw NotMinimumError("p_eff_from_periods: pi-mode is not a minimum");
    out.pi_mode = -K - a / (*T_minus * *T_minus);
  }
  if (out.zero_mode && out.pi_mode) {
    out.value = 0.5 * (*out.zero_mode + *out.pi_mode);
    out.spread = std::abs(*out.zero_mode - *out.pi_mode) / std::max(std::abs(out.value), 1e-300);
  } else {
    out.value = out.zero_mode ? *out.zero_mode : *out.pi_mode;
  }
  return out;
}

// ---- GP-side measurements -------------------------------------------------------------

enum class Mode { zero, pi };

struct PeriodRun {
  double period = 0.0;  // s
  double z_seed = 0.0;
  double dt = 0.0;
  std::vector<EvolveSample> series;
};

struct PeriodOptions {
  double periods = 3.0;      // length of the run in units of the expected period
  double dt = 1e-5;          // s
  int samples_per_period = 400;
  double min_subspace_norm2 = 0.0;
};

/// Seeds tm(z_seed, phi_mode) from the modes and measures the period of Z(t) by real-time GP
/// propagation at the modes' rotation rate.
inline PeriodRun measure_period(const GpSolver& gp, const LocalizedModes& m, Mode mode, double z_seed,
                                double t_expected, const PeriodOptions& opt = {}) {
  if (!(t_expected > 0.0) || !std::isfinite(t_expected)) throw GbhError("measure_period: expected period must be positive");
  OrderParameter psi = gp.make_tm(z_seed, mode == Mode::zero ? 0.0 : std::numbers::pi, m);
  EvolveOptions eo;
  eo.dt = opt.dt;
  eo.t_final = opt.periods * t_expected;
  eo.sample_every = std::max(1, static_cast<int>(std::lround(t_expected / opt.samples_per_period / opt.dt)));
  eo.energy_every = 50;
  eo.modes = &m;
  PeriodRun run;
  run.z_seed = z_seed;
  run.dt = opt.dt;
  run.series = gp.evolve_real(psi, eo);
  std::vector<double> t, z;
  t.reserve(run.series.size());
  z.reserve(run.series.size());
  for (const auto& s : run.series) {
    t.push_back(s.t);
    z.push_back(s.z);
  }
  run.period = period_estimate(t, z);
  return run;
}

/// GP stationary pair, modes and parameters at one rotation rate.
struct FrequencyPoint {
  double f_over_f0 = 0.0;
  double omega = 0.0;
  StationaryState zero;
  StationaryState pi;
  LocalizedModes modes;
  GbhIntegrals integrals;
  double K_split = 0.0;
  double overlap = 0.0;  // |<Psi_0, Psi_pi>|
};

inline FrequencyPoint analyze_frequency(const GpSolver& gp, double f_over_f0, double f0,
                                        const FrequencyPoint* warm = nullptr, const RelaxOptions& ro = {}) {
  FrequencyPoint p;
  p.f_over_f0 = f_over_f0;
  p.omega = 2.0 * std::numbers::pi * f_over_f0 * f0;
  auto warm_state = [&](const StationaryState& s) {
    OrderParameter o = s.psi;
    o.omega = p.omega;
    return o;
  };
  std::optional<OrderParameter> w0, wp;
  if (warm) {
    w0 = warm_state(warm->zero);
    wp = warm_state(warm->pi);
  }
  p.zero = gp.stationary(PhaseLabel::zero, p.omega, w0 ? &*w0 : nullptr, ro);
  p.pi = gp.stationary(PhaseLabel::pi, p.omega, wp ? &*wp : nullptr, ro);
  p.overlap = std::abs(inner(gp.grid(), p.zero.psi.psi, p.pi.psi.psi));
  p.modes = localized_modes(gp, p.zero, p.pi);
  p.integrals = gbh_integrals(gp, p.modes);
  p.K_split = k_from_energy_split(p.zero.energy_per_particle, p.pi.energy_per_particle);
  return p;
}

/// f0 from the zero of the right-junction current of the pi-state (odd sector) as a function
/// of the rotation frequency; Illinois-modified regula falsi on an expanding bracket.
struct F0Result {
  double f0 = 0.0;  // Hz
  int evaluations = 0;
  double current_at_root = 0.0;
};

inline F0Result f0_numeric(const GpSolver& gp, double rel_tol = 1e-4, const RelaxOptions& ro = {}) {
  const double f1d = f0_one_dim(gp.consts(), gp.config().r0);
  std::optional<OrderParameter> warm;
  F0Result res;
  auto current = [&](double f) {
    const double omega = 2.0 * std::numbers::pi * f;
    if (warm) warm->omega = omega;
    const auto st = gp.stationary(PhaseLabel::pi, omega, warm ? &*warm : nullptr, ro);
    warm = st.psi;
    ++res.evaluations;
    return gp.ring_current(st.psi.psi, omega);
  };
  double a = f1d, b = 1.03 * f1d;
  double fa = current(a), fb = current(b);
  for (int k = 0; fa * fb > 0.0; ++k) {
    if (k >= 8) throw GbhError("f0_numeric: bracket does not straddle a zero of the junction current");
    const double w = b - a;
    if (std::abs(fa) < std::abs(fb)) {
      b = a;
      fb = fa;
      a -= 2.0 * w;
      fa = current(a);
    } else {
      a = b;
      fa = fb;
      b += 2.0 * w;
      fb = current(b);
    }
  }
  int side = 0;
  double c = a, fc = fa;
  for (int it = 0; it < 60 && std::abs(b - a) > rel_tol * f1d * 0.5; ++it) {
    c = (a * fb - b * fa) / (fb - fa);
    fc = current(c);
    if (fc == 0.0) break;
    if (fc * fb < 0.0) {
      a = b;
      fa = fb;
      if (side == -1) fa *= 0.5;
      side = -1;
    } else {
      if (side == 1) fa *= 0.5;
      side = 1;
    }
    b = c;
    fb = fc;
  }
  res.f0 = c;
  res.current_at_root = fc;
  return res;
}

// ---- frequency sweep ------------------------------------------------------------------

struct GbhSample {
  GbhParams params;
  double K_integral = 0.0;
  double E0 = 0.0;
  double Epi = 0.0;
  double mu0 = 0.0;
  double overlap = 0.0;
  std::optional<double> T_plus;
  std::optional<double> T_minus;
  std::optional<double> P_eff_zero;
  std::optional<double> P_eff_pi;
  double P_eff_spread = 0.0;
  bool has_p_eff = false;           // P_eff measured from periods at this sample
  bool p_eff_interpolated = false;  // P_eff filled in from measured neighbours
  bool refined = false;  // added by edge refinement
  std::string error;     // non-empty if the point failed
};

struct GbhCurve {
  double f0 = 0.0;
  double f0_one_dim = 0.0;
  double mu_gs = 0.0;  // nK, ground state at rest
  double K0 = 0.0, U0 = 0.0, P0 = 0.0, P_prime0 = 0.0;
  double T0 = 0.0;
  double U_eff = 0.0;
  double P_eff0 = 0.0;
  std::vector<GbhSample> samples;  // ordered by f/f0
  std::optional<std::pair<double, double>> central_interval;

  [[nodiscard]] double delta_f() const {
    return central_interval ? central_interval->second - central_interval->first : 0.0;
  }
  [[nodiscard]] bool in_central_interval(double f) const {
    return central_interval && f >= central_interval->first && f <= central_interval->second;
  }
  [[nodiscard]] const GbhSample* at(double f, double tol = 1e-9) const {
    for (const auto& s : samples)
      if (std::abs(s.params.f_over_f0 - f) < tol) return &s;
    return nullptr;
  }
};

/// Central interval: maximal interval around f/f0 = 1/2 where |K| < |P_eff| and P_eff < 0,
/// with edges interpolated linearly in |K| - |P_eff| between adjacent samples.
inline std::optional<std::pair<double, double>> central_interval(const std::vector<GbhSample>& samples) {
  std::vector<const GbhSample*> s;
  for (const auto& x : samples)
    if (x.error.empty() && (x.has_p_eff || x.p_eff_interpolated)) s.push_back(&x);
  std::sort(s.begin(), s.end(), [](auto* a, auto* b) { return a->params.f_over_f0 < b->params.f_over_f0; });
  auto g = [](const GbhSample* x) {
    return x->params.P_eff < 0.0 ? std::abs(x->params.K) - std::abs(x->params.P_eff) : std::abs(x->params.K) + 1.0;
  };
  int centre = -1;
  double best = 1e300;
  for (int i = 0; i < static_cast<int>(s.size()); ++i)
    if (g(s[i]) < 0.0 && std::abs(s[i]->params.f_over_f0 - 0.5) < best) {
      best = std::abs(s[i]->params.f_over_f0 - 0.5);
      centre = i;
    }
  if (centre < 0) return std::nullopt;
  auto edge = [&](int i, int j) {
    const double gi = g(s[i]), gj = g(s[j]);
    const double fi = s[i]->params.f_over_f0, fj = s[j]->params.f_over_f0;
    return fi + (fj - fi) * gi / (gi - gj);
  };
  int lo = centre, hi = centre;
  while (lo > 0 && g(s[lo - 1]) < 0.0) --lo;
  while (hi + 1 < static_cast<int>(s.size()) && g(s[hi + 1]) < 0.0) ++hi;
  const double f_lo = lo > 0 ? edge(lo, lo - 1) : s[lo]->params.f_over_f0;
  const double f_hi = hi + 1 < static_cast<int>(s.size()) ? edge(hi, hi + 1) : s[hi]->params.f_over_f0;
  return std::make_pair(f_lo, f_hi);
}

/// Fills P_eff of samples without a period measurement by linear interpolation in f between
/// measured samples (constant beyond the outermost ones).
inline void fill_p_eff(std::vector<GbhSample>& samples) {
  std::vector<std::pair<double, double>> known;
  for (const auto& s : samples)
    if (s.error.empty() && s.has_p_eff) known.emplace_back(s.params.f_over_f0, s.params.P_eff);
  std::sort(known.begin(), known.end());
  for (auto& s : samples) {
    s.p_eff_interpolated = false;
    if (!s.error.empty() || s.has_p_eff || known.empty()) continue;
    const double f = s.params.f_over_f0;
    auto hi = std::lower_bound(known.begin(), known.end(), std::make_pair(f, -1e300));
    if (hi == known.begin()) s.params.P_eff = hi->second;
    else if (hi == known.end()) s.params.P_eff = known.back().second;
    else {
      const auto lo = std::prev(hi);
      s.params.P_eff = lo->second + (hi->second - lo->second) * (f - lo->first) / (hi->first - lo->first);
    }
    s.p_eff_interpolated = true;
  }
}

struct SweepOptions {
  RelaxOptions relax;
  PeriodOptions period;
  bool periods = true;                 // measure P_eff at every sample
  std::vector<double> period_points;   // when `periods` is false: samples that still get periods
  int refine_iterations = 1;           // evaluations added at each interpolated interval edge
  bool refine_with_periods = true;     // refinement samples measure P_eff (else interpolate it)
  double z_seed_fraction = 0.05;  // Z_seed = fraction * Zc estimate
  double p_eff_ratio_guess = 0.007;  // P_eff/P prior, only used to size the seed and run length
  std::optional<double> f0;      // skip the f0 search when given, Hz
  std::function<void(const std::string&)> log;
};

/// Drives the GP pipeline over rotation frequencies and assembles the GBH curve.
class GbhSweeper {
 public:
  GbhSweeper(const GpSolver& gp, SweepOptions opt) : gp_(gp), opt_(std::move(opt)) {}

  /// f0, the rest-frame parameters and U_eff from the 0-mode period at rest.
  void calibrate() {
    const auto& cfg = gp_.config();
    curve_.f0_one_dim = f0_one_dim(gp_.consts(), cfg.r0);
    if (opt_.f0) {
      curve_.f0 = *opt_.f0;
    } else {
      say("searching f0");
      curve_.f0 = f0_numeric(gp_, 1e-4, opt_.relax).f0;
    }
    say("f0 = " + std::to_string(curve_.f0) + " Hz; rest-frame states");
    rest_ = analyze_frequency(gp_, 0.0, curve_.f0, nullptr, opt_.relax);
    curve_.mu_gs = rest_->zero.mu;
    curve_.K0 = rest_->K_split;
    curve_.U0 = rest_->integrals.U;
    curve_.P0 = rest_->integrals.P;
    curve_.P_prime0 = rest_->integrals.P_prime;
    const int N = cfg.N;
    const double t_guess = tm_small_period(curve_.U0, curve_.K0 - curve_.P0, N, gp_.consts());
    const double zc = std::sqrt(8.0 * std::abs(curve_.K0) / (N * curve_.U0));
    say("T0 run");
    const auto run = measure_period(gp_, rest_->modes, Mode::zero, opt_.z_seed_fraction * zc, t_guess, opt_.period);
    curve_.T0 = run.period;
    curve_.U_eff = u_eff_from_period(run.period, curve_.K0, curve_.P0, N, gp_.consts());
    say("T0 = " + std::to_string(run.period) + " s, U_eff/U = " + std::to_string(curve_.U_eff / curve_.U0));
  }

  [[nodiscard]] const GbhCurve& curve() const { return curve_; }
  [[nodiscard]] const FrequencyPoint& rest_point() const { return *rest_; }

  /// One sweep sample; failures are recorded in the sample rather than thrown.
  GbhSample sample(double f, std::optional<bool> with_periods = std::nullopt) {
    GbhSample s;
    s.params.f_over_f0 = f;
    s.params.N = gp_.config().N;
    s.params.U_eff = curve_.U_eff;
    try {
      const FrequencyPoint* warm = nearest_warm(f);
      FrequencyPoint p = f == 0.0 && rest_ ? *rest_ : analyze_frequency(gp_, f, curve_.f0, warm, opt_.relax);
      s.K_integral = p.integrals.K;
      s.params.K = p.K_split;
      s.params.U = p.integrals.U;
      s.params.P = p.integrals.P;
      s.params.P_prime = p.integrals.P_prime;
      s.E0 = p.zero.energy_per_particle;
      s.Epi = p.pi.energy_per_particle;
      s.mu0 = p.zero.mu;
      s.overlap = p.overlap;
      if (with_periods.value_or(opt_.periods)) measure_p_eff(p, s);
      warm_.insert_or_assign(f, std::move(p));
      trim_warm(f);
    } catch (const std::exception& e) {
      s.error = e.what();
      say("f/f0 = " + std::to_string(f) + " failed: " + s.error);
    }
    return s;
  }

  /// Samples every frequency, then refines the central-interval edges.
  GbhCurve run(const std::vector<double>& f_samples) {
    if (f_samples.empty()) throw GbhError("sweep: empty frequency grid");
    if (!rest_) calibrate();
    std::vector<double> fs = f_samples;
    std::sort(fs.begin(), fs.end());
    // march outward from the rest frame so warm starts stay close
    auto wants_periods = [&](double f) {
      if (opt_.periods) return true;
      return std::any_of(opt_.period_points.begin(), opt_.period_points.end(),
                         [&](double p) { return std::abs(p - f) < 1e-9; });
    };
    for (double f : fs) {
      say("f/f0 = " + std::to_string(f));
      curve_.samples.push_back(sample(f, wants_periods(f)));
    }
    if (auto s0 = curve_.at(0.0); s0 && s0->has_p_eff) curve_.P_eff0 = s0->params.P_eff;
    fill_p_eff(curve_.samples);
    curve_.central_interval = central_interval(curve_.samples);
    for (int it = 0; it < opt_.refine_iterations && curve_.central_interval; ++it) {
      for (double f : {curve_.central_interval->first, curve_.central_interval->second}) {
        if (curve_.at(f, 1e-6)) continue;
        say("refining edge at f/f0 = " + std::to_string(f));
        auto s = sample(f, opt_.refine_with_periods);
        s.refined = true;
        curve_.samples.push_back(std::move(s));
      }
      std::sort(curve_.samples.begin(), curve_.samples.end(),
                [](const auto& a, const auto& b) { return a.params.f_over_f0 < b.params.f_over_f0; });
      fill_p_eff(curve_.samples);
      curve_.central_interval = central_interval(curve_.samples);
    }
    return curve_;
  }

 private:
  void say(const std::string& m) const {
    if (opt_.log) opt_.log(m);
  }

  const FrequencyPoint* nearest_warm(double f) const {
    const FrequencyPoint* best = rest_ ? &*rest_ : nullptr;
    double d = best ? std::abs(f) : 1e300;
    for (const auto& [fk, p] : warm_)
      if (std::abs(fk - f) < d) {
        d = std::abs(fk - f);
        best = &p;
      }
    return best;
  }

  void trim_warm(double keep) {
    while (warm_.size() > 3) {
      auto far = warm_.begin();
      for (auto it = warm_.begin(); it != warm_.end(); ++it)
        if (std::abs(it->first - keep) > std::abs(far->first - keep)) far = it;
      warm_.erase(far);
    }
  }

  /// Runs the period measurement for the mode(s) expected to be minima: the 0-mode below
  /// f0/2, the pi-mode above, both at f0/2.
  void measure_p_eff(const FrequencyPoint& p, GbhSample& s) const {
    const int N = s.params.N;
    const double K = s.params.K;
    const double peff_guess = opt_.p_eff_ratio_guess * s.params.P;
    const double zc = std::sqrt(std::max(8.0 * std::abs(K), 2.0 * std::abs(peff_guess)) / (N * curve_.U_eff));
    const double f = s.params.f_over_f0;
    const bool do_zero = f <= 0.5 + 1e-9;
    const bool do_pi = f >= 0.5 - 1e-9;
    auto run_mode = [&](Mode m) -> std::optional<double> {
      const double curv = m == Mode::zero ? K - peff_guess : -K - peff_guess;
      const double t_guess = tm_small_period(curve_.U_eff, std::max(curv, 0.25 * std::abs(peff_guess)), N, gp_.consts());
      const auto r = measure_period(gp_, p.modes, m, opt_.z_seed_fraction * zc, t_guess, opt_.period);
      return r.period;
    };
    if (do_zero) s.T_plus = run_mode(Mode::zero);
    if (do_pi) s.T_minus = run_mode(Mode::pi);
    const auto est = p_eff_from_periods(s.T_plus, s.T_minus, K, curve_.U_eff, N, gp_.consts());
    s.P_eff_zero = est.zero_mode;
    s.P_eff_pi = est.pi_mode;
    s.P_eff_spread = est.spread;
    s.params.P_eff = est.value;
    s.has_p_eff = true;
  }

  const GpSolver& gp_;
  SweepOptions opt_;
  GbhCurve curve_;
  std::optional<FrequencyPoint> rest_;
  std::map<double, FrequencyPoint> warm_;
};

}  // namespace aquid

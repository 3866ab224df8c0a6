#pragma once

// Rotating-frame 2D Gross-Pitaevskii solver.
//
// H0 = p^2/2m + V - Omega L_z  (the symmetric-gauge form (p-A)^2/2m + V + W_rot with the A^2 and
// centrifugal terms cancelled). Time stepping is a Strang split
//   exp(-i dt V/2) exp(-i dt A_x/2) exp(-i dt A_y) exp(-i dt A_x/2) exp(-i dt V/2)
// with A_x = p_x^2/2m + Omega y p_x diagonal in k_x along each row and
// A_y = p_y^2/2m - Omega x p_y diagonal in k_y along each column.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aquid/fft.hpp"
#include "aquid/grid.hpp"
#include "aquid/units.hpp"

namespace aquid {

struct OrderParameter {
  Grid2D grid;
  Field psi;
  double omega = 0.0;  // rad/s
};

enum class PhaseLabel { zero, pi, other };

inline const char* to_string(PhaseLabel p) {
  switch (p) {
    case PhaseLabel::zero: return "zero";
    case PhaseLabel::pi: return "pi";
    default: return "other";
  }
}

struct StationaryState {
  OrderParameter psi;
  double mu = 0.0;                   // nK
  double energy_per_particle = 0.0;  // nK
  int winding = 0;
  PhaseLabel phase_label = PhaseLabel::other;
  double phase = 0.0;     // upper-minus-lower phase at the ring top/bottom, rad
  double residual = 0.0;  // ||(H - mu) Psi||, nK
  long steps = 0;
  long polish_iterations = 0;
};

/// Upper/lower junction modes psi_u, psi_l on a common grid.
struct LocalizedModes {
  Field upper;
  Field lower;
  double omega = 0.0;
};

struct TmProjection {
  double z = 0.0;
  double phi = 0.0;
  double subspace_norm2 = 0.0;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class SectorEscapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ProjectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double ring_potential(const ScenarioConfig& s, double r) {
  const double d = r - s.r0;
  return s.V0 * (1.0 - std::exp(-2.0 * d * d / (s.w * s.w)));
}

inline double barrier_potential(const ScenarioConfig& s, double y) {
  return s.Vb * std::exp(-y * y / (s.lambda_b * s.lambda_b));
}

/// V_ring(r) + V_barr(y), nK.
inline double potential(const ScenarioConfig& s, double x, double y) {
  return ring_potential(s, std::hypot(x, y)) + barrier_potential(s, y);
}

inline double wrap_phase(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

class PeriodError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Period of a sampled oscillation from the mean spacing of same-direction crossings of the
/// series mean. Crossings are located by linear interpolation; a hysteresis band of
/// `hysteresis` times the half peak-to-peak amplitude suppresses noise-induced recrossings.
inline double period_estimate(std::span<const double> t, std::span<const double> y, double hysteresis = 0.2) {
  if (t.size() != y.size()) throw std::invalid_argument("period_estimate: size mismatch");
  if (y.size() < 4) throw PeriodError("period_estimate: too few samples");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double amp = 0.5 * (*hi - *lo);
  if (!(amp > 0.0) || !std::isfinite(amp)) throw PeriodError("period_estimate: series is constant");
  const double h = hysteresis * amp;
  std::vector<double> up, down;
  int armed = 0;  // -1: below the band, +1: above
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < mean - h) {
      if (armed == 1) {
        std::size_t j = i;
        while (j > 0 && y[j - 1] < mean) --j;
        const double f = (y[j - 1] - mean) / (y[j - 1] - y[j]);
        down.push_back(t[j - 1] + f * (t[j] - t[j - 1]));
      }
      armed = -1;
    } else if (y[i] > mean + h) {
      if (armed == -1) {
        std::size_t j = i;
        while (j > 0 && y[j - 1] > mean) --j;
        const double f = (mean - y[j - 1]) / (y[j] - y[j - 1]);
        up.push_back(t[j - 1] + f * (t[j] - t[j - 1]));
      }
      armed = 1;
    }
  }
  if (up.size() + down.size() < 3) throw PeriodError("period_estimate: fewer than three mean crossings");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto* c : {&up, &down})
    if (c->size() >= 2) {
      sum += c->back() - c->front();
      count += c->size() - 1;
    }
  return sum / static_cast<double>(count);
}

enum class CutSegment { right, left, full };

struct RelaxOptions {
  Parity parity = Parity::any;
  std::optional<PhaseLabel> expect;  // sector-escape check
  long max_steps = 2'000'000;
  int check_every = 200;
  double energy_tol = 1e-10;  // relative energy change per split-step block
  long polish_max_iter = 20'000;
  int polish_restart = 50;
};

struct EvolveSample {
  double t = 0.0;
  double z = 0.0;
  double phi = 0.0;
  double energy = 0.0;   // nK, NaN when not sampled
  double current = 0.0;  // net downward current per particle across y = 0, 1/s
  double norm = 1.0;
  double subspace_norm2 = 0.0;
};

struct EvolveOptions {
  double t_final = 0.0;
  double dt = 1e-6;
  int sample_every = 100;
  int energy_every = 10;  // in samples
  const LocalizedModes* modes = nullptr;
  double norm_tol = 1e-6;
  double energy_rel_tol = 1e-4;
  /// Return true to stop early.
  std::function<bool(const EvolveSample&)> observer;
};

class GpSolver {
 public:
  explicit GpSolver(ScenarioConfig cfg, PhysConsts c = constants())
      : cfg_(std::move(cfg)),
        c_(c),
        grid_(cfg_.grid_points_per_axis, cfg_.box_half_length),
        gN_(coupling_2d(c_, cfg_.omega_z).g2d * cfg_.N),
        fft_(grid_.n) {
    const int n = grid_.n;
    V_.resize(grid_.size());
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) V_[grid_.index(ix, iy)] = potential(cfg_, grid_.coord(ix), grid_.coord(iy));
    k_.resize(n);
    k1_.resize(n);
    for (int j = 0; j < n; ++j) {
      k_[j] = grid_.wavenumber(j);
      k1_[j] = grid_.wavenumber_odd(j);
    }
  }

  [[nodiscard]] const ScenarioConfig& config() const { return cfg_; }
  [[nodiscard]] const PhysConsts& consts() const { return c_; }
  [[nodiscard]] const Grid2D& grid() const { return grid_; }
  [[nodiscard]] double gN() const { return gN_; }
  [[nodiscard]] double g2d() const { return gN_ / cfg_.N; }
  [[nodiscard]] std::span<const double> potential_values() const { return V_; }
  [[nodiscard]] double omega_from_ratio(double f_over_f0, double f0) const {
    return 2.0 * std::numbers::pi * f_over_f0 * f0;
  }

  // ---- spectral derivatives -------------------------------------------------------------

  [[nodiscard]] Field d_dx(std::span<const cplx> a) const {
    const int n = grid_.n;
    Field b(a.begin(), a.end());
    fft_.forward_x(b.data());
    for (int iy = 0; iy < n; ++iy)
      for (int j = 0; j < n; ++j) b[grid_.index(j, iy)] *= cplx(0.0, k1_[j] / n);
    fft_.backward_x(b.data());
    return b;
  }

  [[nodiscard]] Field d_dy(std::span<const cplx> a) const {
    const int n = grid_.n;
    Field b(a.begin(), a.end());
    fft_.forward_y(b.data());
    for (int j = 0; j < n; ++j)
      for (int ix = 0; ix < n; ++ix) b[grid_.index(ix, j)] *= cplx(0.0, k1_[j] / n);
    fft_.backward_y(b.data());
    return b;
  }

  /// H0 psi = [-hbar^2 nabla^2/2m + V - Omega L_z] psi, nK um^-1.
  [[nodiscard]] Field apply_h0(std::span<const cplx> psi, double omega) const {
    const int n = grid_.n;
    const double nn = static_cast<double>(n) * n;
    Field kin(psi.begin(), psi.end());
    fft_.forward_2d(kin.data());
    for (int jy = 0; jy < n; ++jy)
      for (int jx = 0; jx < n; ++jx)
        kin[grid_.index(jx, jy)] *= c_.hbar2_over_2mkB * (k_[jx] * k_[jx] + k_[jy] * k_[jy]) / nn;
    fft_.backward_2d(kin.data());
    for (std::size_t i = 0; i < kin.size(); ++i) kin[i] += V_[i] * psi[i];
    if (omega != 0.0) {
      // -Omega L_z = i hbar Omega (x d_y - y d_x)
      const Field dx = d_dx(psi);
      const Field dy = d_dy(psi);
      const cplx pref(0.0, c_.hbar_over_kB * omega);
      for (int iy = 0; iy < n; ++iy) {
        const double y = grid_.coord(iy);
        for (int ix = 0; ix < n; ++ix) {
          const auto i = grid_.index(ix, iy);
          kin[i] += pref * (grid_.coord(ix) * dy[i] - y * dx[i]);
        }
      }
    }
    return kin;
  }

  /// H psi with the mean-field term gN|psi|^2.
  [[nodiscard]] Field apply_h(std::span<const cplx> psi, double omega) const {
    Field h = apply_h0(psi, omega);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += gN_ * std::norm(psi[i]) * psi[i];
    return h;
  }

  /// Energy functional per particle: <psi|H0 + (gN/2)|psi|^2|psi> for a normalized psi.
  [[nodiscard]] double energy_per_particle(std::span<const cplx> psi, double omega) const {
    const Field h0 = apply_h0(psi, omega);
    double e = inner(grid_, psi, h0).real();
    double quartic = 0.0;
    for (const auto& v : psi) quartic += std::norm(v) * std::norm(v);
    return e + 0.5 * gN_ * quartic * grid_.cell_area();
  }

  [[nodiscard]] double chemical_potential(std::span<const cplx> psi, double omega) const {
    return inner(grid_, psi, apply_h(psi, omega)).real();
  }

  [[nodiscard]] double residual(std::span<const cplx> psi, double omega, double mu) const {
    Field h = apply_h(psi, omega);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] -= mu * psi[i];
    return std::sqrt(norm2(grid_, h));
  }

  // ---- initial states -------------------------------------------------------------------

  /// Thomas-Fermi-like ring profile times exp(i n theta).
  [[nodiscard]] OrderParameter make_winding(int winding, double omega) const {
    const int n = grid_.n;
    OrderParameter op{grid_, Field(grid_.size()), omega};
    const double mu_guess = 0.8 * cfg_.Vb;
    for (int iy = 0; iy < n; ++iy) {
      const double y = grid_.coord(iy);
      for (int ix = 0; ix < n; ++ix) {
        const double x = grid_.coord(ix);
        const double r = std::hypot(x, y);
        const double d = (r - cfg_.r0) / cfg_.w;
        const double amp = std::sqrt(std::max(mu_guess - potential(cfg_, x, y), 0.0) + 1e-2 * mu_guess * std::exp(-d * d));
        op.psi[grid_.index(ix, iy)] = std::polar(amp, winding * std::atan2(y, x));
      }
    }
    normalize(grid_, op.psi);
    return op;
  }

  /// [e^{i phi} psi_u sqrt(1-Z) + psi_l sqrt(1+Z)] / sqrt(2)
  [[nodiscard]] OrderParameter make_tm(double z, double phi, const LocalizedModes& m) const {
    if (std::abs(z) > 1.0) throw std::invalid_argument("make_tm: |Z| must not exceed 1");
    check_orthonormal(m, 1e-6);
    OrderParameter op{grid_, Field(grid_.size()), m.omega};
    const cplx a = std::polar(std::sqrt((1.0 - z) / 2.0), phi);
    const double b = std::sqrt((1.0 + z) / 2.0);
    for (std::size_t i = 0; i < op.psi.size(); ++i) op.psi[i] = a * m.upper[i] + b * m.lower[i];
    return op;
  }

  void check_orthonormal(const LocalizedModes& m, double tol) const {
    const double nu = norm2(grid_, m.upper), nl = norm2(grid_, m.lower);
    const double ov = std::abs(inner(grid_, m.upper, m.lower));
    if (std::abs(nu - 1.0) > tol || std::abs(nl - 1.0) > tol || ov > tol)
      throw std::invalid_argument("localized modes are not orthonormal (|<u,u>-1|=" + std::to_string(std::abs(nu - 1.0)) +
                                  ", |<l,l>-1|=" + std::to_string(std::abs(nl - 1.0)) +
                                  ", |<u,l>|=" + std::to_string(ov) + ")");
  }

  // ---- observables ----------------------------------------------------------------------

  /// Integer phase circulation along the circle r = r0 (bilinear interpolation).
  [[nodiscard]] int winding(std::span<const cplx> psi) const {
    constexpr int samples = 720;
    double total = 0.0;
    auto at = [&](int k) {
      const double th = 2.0 * std::numbers::pi * (k + 0.5) / samples;
      return interpolate(psi, cfg_.r0 * std::cos(th), cfg_.r0 * std::sin(th));
    };
    cplx prev = at(0);
    for (int k = 1; k <= samples; ++k) {
      const cplx cur = at(k % samples);
      total += std::arg(cur * std::conj(prev));
      prev = cur;
    }
    return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
  }

  /// Phase at the ring top minus phase at the ring bottom (nodes (0, +-r0)).
  [[nodiscard]] double top_bottom_phase(std::span<const cplx> psi) const {
    const int c = grid_.center();
    const int off = static_cast<int>(std::lround(cfg_.r0 / grid_.dx));
    return std::arg(psi[grid_.index(c, c + off)] * std::conj(psi[grid_.index(c, c - off)]));
  }

  [[nodiscard]] static PhaseLabel label_phase(double phase) {
    if (std::abs(phase) < 0.05) return PhaseLabel::zero;
    if (std::abs(std::abs(phase) - std::numbers::pi) < 0.05) return PhaseLabel::pi;
    return PhaseLabel::other;
  }

  /// Line integral of |psi|^2 [(hbar/m) d_y arg psi - Omega x] along y = 0: the rotating-frame
  /// particle current per particle through the chosen segment, counted along +y.
  [[nodiscard]] double cut_current(std::span<const cplx> psi, double omega, CutSegment seg) const {
    const int n = grid_.n;
    const int c = grid_.center();
    const Field dy = d_dy(psi);
    const double hbar_m = c_.hbar_over_m();
    double s = 0.0;
    for (int ix = 0; ix < n; ++ix) {
      const double x = grid_.coord(ix);
      double w = 1.0;
      if (seg == CutSegment::right) w = ix > c ? 1.0 : (ix == c ? 0.5 : 0.0);
      if (seg == CutSegment::left) w = ix < c ? 1.0 : (ix == c ? 0.5 : 0.0);
      if (w == 0.0) continue;
      const auto i = grid_.index(ix, c);
      s += w * (hbar_m * (std::conj(psi[i]) * dy[i]).imag() - omega * x * std::norm(psi[i]));
    }
    return s * grid_.dx;
  }

  /// Counterclockwise persistent current through the right junction.
  [[nodiscard]] double ring_current(std::span<const cplx> psi, double omega) const {
    return cut_current(psi, omega, CutSegment::right);
  }

  /// Net current from the upper to the lower half, N Zdot / 2 per particle.
  [[nodiscard]] double downward_current(std::span<const cplx> psi, double omega) const {
    return -cut_current(psi, omega, CutSegment::full);
  }

  // ---- propagation ----------------------------------------------------------------------

  /// Imaginary-time relaxation to a stationary state in the requested parity sector.
  ///
  /// Split-step imaginary-time blocks run until the relative energy change per block drops
  /// below `energy_tol`. The split-step fixed point carries an O(dt^2) bias in the residual, so
  /// the state is then polished by preconditioned nonlinear conjugate gradients on the energy
  /// (tangent to the unit sphere, same parity sector) until ||(H - mu) psi|| < convergence_tol.
  [[nodiscard]] StationaryState relax_imaginary(const OrderParameter& init, double omega, const RelaxOptions& opt = {}) const {
    if (!(init.grid == grid_)) throw std::invalid_argument("relax_imaginary: grid mismatch");
    Field psi = init.psi;
    project_parity(grid_, psi, opt.parity);
    normalize(grid_, psi);
    Stepper st(*this, omega, cfg_.dt_imag, true);
    double e_prev = energy_per_particle(psi, omega);
    long steps = 0;
    for (;;) {
      for (int k = 0; k < opt.check_every; ++k) {
        st.step(psi);
        normalize(grid_, psi);
      }
      project_parity(grid_, psi, opt.parity);
      normalize(grid_, psi);
      steps += opt.check_every;
      const double e = energy_per_particle(psi, omega);
      const double de = std::abs(e - e_prev) / std::max(std::abs(e), 1e-300);
      e_prev = e;
      if (de < opt.energy_tol) break;
      if (steps >= opt.max_steps)
        throw ConvergenceError("imaginary-time relaxation did not converge after " + std::to_string(steps) +
                               " steps (relative energy change per block " + std::to_string(de) + ")");
    }
    StationaryState out;
    const auto pol = polish(psi, omega, opt);
    if (!(pol.residual < cfg_.convergence_tol))
      throw ConvergenceError("stationary-state polish stalled after " + std::to_string(pol.iterations) +
                             " iterations (residual " + std::to_string(pol.residual) + " nK, tolerance " +
                             std::to_string(cfg_.convergence_tol) + ")");
    out.mu = pol.mu;
    out.residual = pol.residual;
    out.energy_per_particle = energy_per_particle(psi, omega);
    out.steps = steps;
    out.polish_iterations = pol.iterations;
    out.phase = top_bottom_phase(psi);
    out.phase_label = label_phase(out.phase);
    out.winding = winding(psi);
    out.psi = OrderParameter{grid_, std::move(psi), omega};
    if (opt.expect && *opt.expect != out.phase_label)
      throw SectorEscapeError(std::string("relaxation left the requested sector: expected ") + to_string(*opt.expect) +
                              ", got " + to_string(out.phase_label) + " (phase " + std::to_string(out.phase) + ")");
    return out;
  }

  /// Relaxes the 0-state (even sector, winding-0 seed) or the pi-state (odd sector, winding-1 seed).
  [[nodiscard]] StationaryState stationary(PhaseLabel which, double omega, const OrderParameter* warm = nullptr,
                                           RelaxOptions opt = {}) const {
    if (which == PhaseLabel::other) throw std::invalid_argument("stationary: only zero and pi states are seeded");
    opt.parity = which == PhaseLabel::zero ? Parity::even : Parity::odd;
    opt.expect = which;
    const OrderParameter seed = warm ? *warm : make_winding(which == PhaseLabel::zero ? 0 : 1, omega);
    return relax_imaginary(seed, omega, opt);
  }

  /// Plain renormalized split-step imaginary-time steps (no polish, no parity projection).
  void imaginary_steps(Field& psi, double omega, int steps) const {
    Stepper st(*this, omega, cfg_.dt_imag, true);
    for (int k = 0; k < steps; ++k) {
      st.step(psi);
      normalize(grid_, psi);
    }
  }

  /// Real-time propagation with periodic sampling of TM observables, norm and energy.
  std::vector<EvolveSample> evolve_real(OrderParameter& state, const EvolveOptions& opt) const {
    if (!(state.grid == grid_)) throw std::invalid_argument("evolve_real: grid mismatch");
    const double omega = state.omega;
    Stepper st(*this, omega, opt.dt, false);
    std::vector<EvolveSample> out;
    const double e0 = energy_per_particle(state.psi, omega);
    const double n0 = norm2(grid_, state.psi);
    const long total = std::lround(opt.t_final / opt.dt);
    long done = 0;
    int sample_idx = 0;
    auto sample = [&](double t) {
      EvolveSample s;
      s.t = t;
      s.norm = norm2(grid_, state.psi);
      if (opt.modes) {
        const auto p = tm_projection(state.psi, *opt.modes);
        s.z = p.z;
        s.phi = p.phi;
        s.subspace_norm2 = p.subspace_norm2;
      }
      s.current = downward_current(state.psi, omega);
      s.energy = std::numeric_limits<double>::quiet_NaN();
      if (sample_idx % opt.energy_every == 0) {
        s.energy = energy_per_particle(state.psi, omega);
        if (std::abs(s.energy - e0) > opt.energy_rel_tol * std::abs(e0))
          throw InstabilityError("real-time energy drift " + std::to_string((s.energy - e0) / e0) + " at t=" + std::to_string(t));
      }
      if (std::abs(s.norm - n0) > opt.norm_tol)
        throw InstabilityError("real-time norm drift " + std::to_string(s.norm - n0) + " at t=" + std::to_string(t));
      ++sample_idx;
      out.push_back(s);
      return opt.observer && opt.observer(s);
    };
    if (sample(0.0)) return out;
    while (done < total) {
      const int chunk = static_cast<int>(std::min<long>(opt.sample_every, total - done));
      st.advance(state.psi, chunk);
      done += chunk;
      if (sample(done * opt.dt)) break;
    }
    return out;
  }

  // ---- projections onto the two-mode plane ----------------------------------------------

  /// phi = arg(<psi_u, psi> / <psi_l, psi>)
  [[nodiscard]] double phase_difference(std::span<const cplx> psi, const LocalizedModes& m) const {
    const cplx cu = inner(grid_, m.upper, psi);
    const cplx cl = inner(grid_, m.lower, psi);
    if (std::abs(cu) < 1e-12 || std::abs(cl) < 1e-12)
      throw ProjectionError("phase_difference: projection onto a localized mode vanishes");
    return wrap_phase(std::arg(cu / cl));
  }

  [[nodiscard]] TmProjection tm_projection(std::span<const cplx> psi, const LocalizedModes& m) const {
    const cplx cu = inner(grid_, m.upper, psi);
    const cplx cl = inner(grid_, m.lower, psi);
    TmProjection p;
    p.subspace_norm2 = std::norm(cu) + std::norm(cl);
    p.z = p.subspace_norm2 > 0.0 ? (std::norm(cl) - std::norm(cu)) / p.subspace_norm2 : 0.0;
    p.phi = (std::abs(cu) > 0.0 && std::abs(cl) > 0.0) ? wrap_phase(std::arg(cu / cl)) : 0.0;
    return p;
  }

 private:
  struct PolishResult {
    double mu = 0.0;
    double residual = 0.0;
    long iterations = 0;
  };

  /// Preconditioned Polak-Ribiere conjugate gradients on E[psi] restricted to ||psi|| = 1.
  /// The step length is the Newton step along the search line using the exact second variation
  /// of the energy functional.
  PolishResult polish(Field& psi, double omega, const RelaxOptions& opt) const {
    const std::size_t sz = psi.size();
    const int n = grid_.n;
    const double es = std::max(cfg_.Vb, 1.0);
    std::vector<double> precond(sz);
    for (int jy = 0; jy < n; ++jy)
      for (int jx = 0; jx < n; ++jx) {
        const double t = c_.hbar2_over_2mkB * (k_[jx] * k_[jx] + k_[jy] * k_[jy]);
        precond[grid_.index(jx, jy)] = 1.0 / ((1.0 + t / es) * static_cast<double>(sz));
      }
    auto tangent = [&](Field& v) {
      project_parity(grid_, v, opt.parity);
      const cplx c = inner(grid_, psi, v);
      for (std::size_t i = 0; i < sz; ++i) v[i] -= c * psi[i];
    };
    Field g_prev, z_prev, dir;
    PolishResult res;
    for (long it = 0;; ++it) {
      Field r = apply_h(psi, omega);
      res.mu = inner(grid_, psi, r).real();
      for (std::size_t i = 0; i < sz; ++i) r[i] -= res.mu * psi[i];
      res.residual = std::sqrt(norm2(grid_, r));
      res.iterations = it;
      if (res.residual < cfg_.convergence_tol || it >= opt.polish_max_iter) return res;
      tangent(r);
      Field z = r;
      fft_.forward_2d(z.data());
      for (std::size_t i = 0; i < sz; ++i) z[i] *= precond[i];
      fft_.backward_2d(z.data());
      tangent(z);
      double beta = 0.0;
      if (!dir.empty() && it % opt.polish_restart != 0) {
        double num = 0.0;
        for (std::size_t i = 0; i < sz; ++i) num += (std::conj(z[i]) * (r[i] - g_prev[i])).real();
        const double den = inner(grid_, z_prev, g_prev).real() / grid_.cell_area();
        beta = den > 0.0 ? std::max(0.0, num / den) : 0.0;
      }
      if (dir.empty()) dir.assign(sz, cplx{});
      for (std::size_t i = 0; i < sz; ++i) dir[i] = -z[i] + beta * dir[i];
      tangent(dir);
      double slope = inner(grid_, dir, r).real();
      if (slope >= 0.0) {
        for (std::size_t i = 0; i < sz; ++i) dir[i] = -z[i];
        slope = inner(grid_, dir, r).real();
      }
      // E'' / 2 = <d, (H0 + gN|psi|^2 - mu) d> + gN int (Re conj(psi) d)^2
      const Field hd = apply_h0(dir, omega);
      double curv = inner(grid_, dir, hd).real() - res.mu * norm2(grid_, dir);
      double quart = 0.0, dens = 0.0;
      for (std::size_t i = 0; i < sz; ++i) {
        const double re = (std::conj(psi[i]) * dir[i]).real();
        quart += re * re;
        dens += std::norm(psi[i]) * std::norm(dir[i]);
      }
      curv += gN_ * (dens + 2.0 * quart) * grid_.cell_area();
      double alpha = curv > 0.0 ? -slope / curv : 1.0 / (es + cfg_.V0);
      for (std::size_t i = 0; i < sz; ++i) psi[i] += alpha * dir[i];
      normalize(grid_, psi);
      g_prev = std::move(r);
      z_prev = std::move(z);
    }
  }

  /// Fused Strang stepper for fixed (omega, dt). Imaginary mode uses exp(-dt E/hbar) factors.
  class Stepper {
   public:
    Stepper(const GpSolver& s, double omega, double dt, bool imaginary)
        : s_(s), imaginary_(imaginary), rotating_(omega != 0.0), tau_(dt / s.c_.hbar_over_kB) {
      const auto& g = s.grid_;
      const int n = g.n;
      const double c = s.c_.hbar2_over_2mkB;
      const double hb = s.c_.hbar_over_kB;
      auto factor = [&](double energy, double frac) {
        return imaginary_ ? cplx(std::exp(-frac * tau_ * energy), 0.0) : std::polar(1.0, -frac * tau_ * energy);
      };
      if (rotating_) {
        ax_.resize(g.size());
        ay_.resize(g.size());
        for (int i = 0; i < n; ++i) {
          const double pos = g.coord(i);
          for (int j = 0; j < n; ++j) {
            const double k = s.k_[j], k1 = s.k1_[j];
            ax_[g.index(j, i)] = factor(c * k * k + hb * omega * pos * k1, 0.5) / double(n);
            ay_[g.index(i, j)] = factor(c * k * k - hb * omega * pos * k1, 1.0) / double(n);
          }
        }
      } else {
        ax_.resize(g.size());
        for (int jy = 0; jy < n; ++jy)
          for (int jx = 0; jx < n; ++jx) {
            const double k2 = s.k_[jx] * s.k_[jx] + s.k_[jy] * s.k_[jy];
            ax_[g.index(jx, jy)] = factor(c * k2, 1.0) / (double(n) * n);
          }
      }
      vhalf_.resize(g.size());
      vfull_.resize(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        vhalf_[i] = factor(s.V_[i], 0.5);
        vfull_[i] = factor(s.V_[i], 1.0);
      }
    }

    /// One complete Strang step.
    void step(Field& psi) const { advance(psi, 1); }

    /// n steps with the interior potential half-steps fused.
    void advance(Field& psi, int nsteps) const {
      if (nsteps <= 0) return;
      potential(psi, 0.5);
      for (int k = 0; k < nsteps; ++k) {
        kinetic(psi);
        potential(psi, k + 1 < nsteps ? 1.0 : 0.5);
      }
    }

   private:
    void potential(Field& psi, double frac) const {
      const double gn = s_.gN_ * frac * tau_;
      const auto& vf = frac == 1.0 ? vfull_ : vhalf_;
      if (imaginary_) {
        for (std::size_t i = 0; i < psi.size(); ++i) psi[i] *= vf[i].real() * std::exp(-gn * std::norm(psi[i]));
      } else {
        for (std::size_t i = 0; i < psi.size(); ++i) {
          const double th = gn * std::norm(psi[i]);
          psi[i] *= vf[i] * cplx(std::cos(th), -std::sin(th));
        }
      }
    }

    void kinetic(Field& psi) const {
      cplx* p = psi.data();
      const std::size_t sz = psi.size();
      if (!rotating_) {
        s_.fft_.forward_2d(p);
        for (std::size_t i = 0; i < sz; ++i) p[i] *= ax_[i];
        s_.fft_.backward_2d(p);
        return;
      }
      s_.fft_.forward_x(p);
      for (std::size_t i = 0; i < sz; ++i) p[i] *= ax_[i];
      s_.fft_.backward_x(p);
      s_.fft_.forward_y(p);
      for (std::size_t i = 0; i < sz; ++i) p[i] *= ay_[i];
      s_.fft_.backward_y(p);
      s_.fft_.forward_x(p);
      for (std::size_t i = 0; i < sz; ++i) p[i] *= ax_[i];
      s_.fft_.backward_x(p);
    }

    const GpSolver& s_;
    bool imaginary_;
    bool rotating_;
    double tau_;  // dt / hbar in nK^-1
    Field ax_, ay_, vhalf_, vfull_;
  };

  [[nodiscard]] cplx interpolate(std::span<const cplx> psi, double x, double y) const {
    const double fx = (x + grid_.L) / grid_.dx, fy = (y + grid_.L) / grid_.dx;
    const int ix = std::clamp(static_cast<int>(std::floor(fx)), 0, grid_.n - 2);
    const int iy = std::clamp(static_cast<int>(std::floor(fy)), 0, grid_.n - 2);
    const double tx = fx - ix, ty = fy - iy;
    return (1 - tx) * (1 - ty) * psi[grid_.index(ix, iy)] + tx * (1 - ty) * psi[grid_.index(ix + 1, iy)] +
           (1 - tx) * ty * psi[grid_.index(ix, iy + 1)] + tx * ty * psi[grid_.index(ix + 1, iy + 1)];
  }

  ScenarioConfig cfg_;
  PhysConsts c_;
  Grid2D grid_;
  double gN_;
  std::vector<double> V_;
  std::vector<double> k_;
  std::vector<double> k1_;
  FftSet fft_;
};

}  // namespace aquid

#pragma once

// Quantized phase Hamiltonian
//   H = -U_eff d^2/dphi^2 - N K cos(phi) + (N P_eff/4) cos(2 phi)
// in the plane-wave basis e^{i n phi}, n in [-n_max, n_max]: diagonal U_eff n^2, first
// off-diagonal -N K/2, second off-diagonal N P_eff/8. Eigenvector coefficients are the
// momentum-representation amplitudes zeta(calN).

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "aquid/units.hpp"

namespace aquid {

class QSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhaseHamiltonian {
  double U_eff = 0.0;  // nK
  double K = 0.0;      // nK
  double P_eff = 0.0;  // nK
  int N = 0;
  int n_max = 32;

  [[nodiscard]] int dim() const { return 2 * n_max + 1; }
  [[nodiscard]] int momentum(int row) const { return row - n_max; }

  [[nodiscard]] Eigen::MatrixXd matrix() const {
    const int d = dim();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    const double t1 = -0.5 * N * K, t2 = N * P_eff / 8.0;
    for (int i = 0; i < d; ++i) {
      const double n = momentum(i);
      h(i, i) = U_eff * n * n;
      if (i + 1 < d) h(i, i + 1) = h(i + 1, i) = t1;
      if (i + 2 < d) h(i, i + 2) = h(i + 2, i) = t2;
    }
    return h;
  }
};

inline PhaseHamiltonian build_matrix(double U_eff, double K, double P_eff, int N, int n_max = 32) {
  if (n_max < 12) throw QSpecError("build_matrix: n_max must be >= 12");
  if (!(U_eff > 0.0)) throw QSpecError("build_matrix: U_eff must be positive");
  return {U_eff, K, P_eff, N, n_max};
}

struct ParityWeights {
  double even = 0.0;
  double odd = 0.0;
};

struct QSpectrum {
  double f_over_f0 = std::numeric_limits<double>::quiet_NaN();
  PhaseHamiltonian h;
  std::vector<double> E;  // nK, ascending
  Eigen::MatrixXd V;      // column j: zeta_j(calN) at row calN + n_max
  double max_residual = 0.0;

  [[nodiscard]] int count() const { return static_cast<int>(E.size()); }
  [[nodiscard]] int n_max() const { return h.n_max; }
  [[nodiscard]] double zeta(int j, int calN) const {
    return std::abs(calN) > h.n_max ? 0.0 : V(calN + h.n_max, j);
  }
  [[nodiscard]] ParityWeights parity(int j) const {
    ParityWeights w;
    for (int r = 0; r < V.rows(); ++r) {
      const double p = V(r, j) * V(r, j);
      (h.momentum(r) % 2 == 0 ? w.even : w.odd) += p;
    }
    return w;
  }
  /// psi_j(phi) = (2 pi)^{-1/2} sum zeta(n) e^{i n phi}; real for these real symmetric vectors.
  [[nodiscard]] std::complex<double> psi(int j, double phi) const { return wavefunction(V.col(j), phi); }

  [[nodiscard]] std::complex<double> wavefunction(const Eigen::VectorXd& c, double phi) const {
    std::complex<double> s{0.0, 0.0};
    for (int r = 0; r < c.size(); ++r) s += c(r) * std::polar(1.0, h.momentum(r) * phi);
    return s / std::sqrt(2.0 * std::numbers::pi);
  }
};

namespace detail {

/// Lowest `count` eigenpairs of a real symmetric matrix restricted to the rows in `idx`.
inline void solve_subspace(const Eigen::MatrixXd& h, const std::vector<int>& idx, int count, std::vector<double>& E,
                           std::vector<Eigen::VectorXd>& vecs) {
  const int m = static_cast<int>(idx.size());
  Eigen::MatrixXd sub(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) sub(a, b) = h(idx[a], idx[b]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
  if (es.info() != Eigen::Success) throw QSpecError("eigensolve: dense symmetric solver failed");
  for (int k = 0; k < std::min(count, m); ++k) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(h.rows());
    for (int a = 0; a < m; ++a) v(idx[a]) = es.eigenvectors()(a, k);
    E.push_back(es.eigenvalues()(k));
    vecs.push_back(std::move(v));
  }
}

/// Deterministic sign: the largest-magnitude component is positive.
inline void fix_sign(Eigen::VectorXd& v) {
  Eigen::Index i = 0;
  v.cwiseAbs().maxCoeff(&i);
  if (v(i) < 0.0) v = -v;
}

inline QSpectrum solve_once(const PhaseHamiltonian& ph, int count) {
  const Eigen::MatrixXd h = ph.matrix();
  std::vector<double> E;
  std::vector<Eigen::VectorXd> vecs;
  if (ph.K == 0.0) {
    // cos(2 phi) couples n to n +- 2 only: even and odd momenta decouple exactly
    std::vector<int> even, odd;
    for (int r = 0; r < ph.dim(); ++r) (ph.momentum(r) % 2 == 0 ? even : odd).push_back(r);
    solve_subspace(h, even, count, E, vecs);
    solve_subspace(h, odd, count, E, vecs);
  } else {
    std::vector<int> all(ph.dim());
    for (int r = 0; r < ph.dim(); ++r) all[r] = r;
    solve_subspace(h, all, count, E, vecs);
  }
  std::vector<int> order(E.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return E[a] < E[b]; });
  QSpectrum s;
  s.h = ph;
  const int m = std::min<int>(count, static_cast<int>(order.size()));
  s.V.resize(ph.dim(), m);
  const double scale = h.cwiseAbs().maxCoeff();
  for (int k = 0; k < m; ++k) {
    s.E.push_back(E[order[k]]);
    Eigen::VectorXd v = vecs[order[k]];
    fix_sign(v);
    s.V.col(k) = v;
    s.max_residual = std::max(s.max_residual, (h * v - E[order[k]] * v).norm() / std::max(scale, 1e-300));
  }
  return s;
}

}  // namespace detail

struct EigensolveOptions {
  double rel_tol = 1e-10;   // on E_0 .. E_{check-1} under n_max doubling
  int check_levels = 8;
  int n_max_cap = 1024;
};

/// Ascending eigenpairs; n_max is doubled until the lowest levels are converged.
inline QSpectrum eigensolve(const PhaseHamiltonian& h0, int count, const EigensolveOptions& opt = {}) {
  if (count < 1 || count > 2 * h0.n_max - 3) throw QSpecError("eigensolve: count must lie in [1, 2 n_max - 3]");
  PhaseHamiltonian h = h0;
  QSpectrum cur = detail::solve_once(h, count);
  for (;;) {
    if (2 * h.n_max > opt.n_max_cap) {
      throw QSpecError("eigensolve: not converged at n_max = " + std::to_string(h.n_max));
    }
    PhaseHamiltonian h2 = h;
    h2.n_max *= 2;
    QSpectrum next = detail::solve_once(h2, count);
    const int levels = std::min({opt.check_levels, cur.count(), next.count()});
    double worst = 0.0;
    for (int j = 0; j < levels; ++j) {
      const double scale = std::max({std::abs(next.E[j]), h.U_eff, 1e-300});
      worst = std::max(worst, std::abs(next.E[j] - cur.E[j]) / scale);
    }
    if (worst < opt.rel_tol) return cur;
    h = h2;
    cur = std::move(next);
  }
}

// ---- Mathieu (K = 0) --------------------------------------------------------------------

struct MathieuLevels {
  std::vector<double> a;            // ascending characteristic numbers
  std::vector<std::string> labels;  // ce_m / se_m in the shifted variable phi + pi/2
};

/// Characteristic numbers a = E/U_eff of the K = 0 problem with q = N|P_eff|/(8 U_eff). Labels
/// come from the symmetry of each eigenfunction about phi = -pi/2 (even: ce, odd: se) and the
/// momentum parity (even n: orders 2k for ce, 2k+2 for se; odd n: 2k+1), counted per class.
inline MathieuLevels mathieu_characteristics(double q, int count, int n_max = 32) {
  if (!(q >= 0.0)) throw QSpecError("mathieu_characteristics: q must be >= 0");
  // U_eff = 1, N = 8, P_eff = -q gives the second off-diagonal N P_eff/8 = -q
  const auto spec = eigensolve(build_matrix(1.0, 0.0, -q, 8, n_max), count);
  MathieuLevels out;
  int ce_even = 0, ce_odd = 0, se_even = 0, se_odd = 0;
  const int nm = spec.n_max();
  for (int j = 0; j < spec.count(); ++j) {
    out.a.push_back(spec.E[j]);
    // d_n = c_n e^{-i n pi/2}; even in the shifted variable when d_{-n} = d_n
    double sym = 0.0, anti = 0.0;
    bool even_block = spec.parity(j).even > 0.5;
    for (int n = 1; n <= nm; ++n) {
      const std::complex<double> ph = std::polar(1.0, -n * std::numbers::pi / 2.0);
      const std::complex<double> dp = spec.V(n + nm, j) * ph;
      const std::complex<double> dm = spec.V(-n + nm, j) * std::conj(ph);
      sym += std::norm(dp + dm);
      anti += std::norm(dp - dm);
    }
    if (std::abs(spec.V(nm, j)) > 0.0) sym += 4.0 * spec.V(nm, j) * spec.V(nm, j);
    std::string lab;
    if (sym >= anti) {
      const int m = even_block ? 2 * ce_even++ : 2 * ce_odd++ + 1;
      lab = "ce" + std::to_string(m);
    } else {
      const int m = even_block ? 2 * se_even++ + 2 : 2 * se_odd++ + 1;
      lab = "se" + std::to_string(m);
    }
    out.labels.push_back(lab);
  }
  return out;
}

/// Delta a ~ 4 sqrt(2/pi) (16 q)^{3/4} exp(-4 sqrt q), valid for q >~ 1.
inline double asymptotic_gap(double q) {
  if (!(q > 0.0)) throw QSpecError("asymptotic_gap: q must be positive");
  return 4.0 * std::sqrt(2.0 / std::numbers::pi) * std::pow(16.0 * q, 0.75) * std::exp(-4.0 * std::sqrt(q));
}

struct MomentumDistribution {
  std::vector<int> calN;
  std::vector<double> prob;
  ParityWeights parity;
};

inline MomentumDistribution momentum_distribution(const QSpectrum& s, int j) {
  if (j < 0 || j >= s.count()) throw QSpecError("momentum_distribution: level index out of range");
  MomentumDistribution d;
  for (int r = 0; r < s.V.rows(); ++r) {
    d.calN.push_back(s.h.momentum(r));
    d.prob.push_back(s.V(r, j) * s.V(r, j));
  }
  d.parity = s.parity(j);
  return d;
}

struct PersistentStates {
  Eigen::VectorXd minus;  // (psi_0 + psi_1)/sqrt2, localized near phi = 0
  Eigen::VectorXd plus;   // (psi_0 - psi_1)/sqrt2, localized near phi = pi
};

/// Signs are chosen so that psi_0 psi_1 > 0 at phi = 0.
inline PersistentStates persistent_states(const QSpectrum& s) {
  if (s.count() < 2) throw QSpecError("persistent_states: need two levels");
  Eigen::VectorXd v0 = s.V.col(0), v1 = s.V.col(1);
  if (v0.sum() * v1.sum() < 0.0) v1 = -v1;
  return {(v0 + v1) / std::numbers::sqrt2, (v0 - v1) / std::numbers::sqrt2};
}

/// Fraction of |psi(phi)|^2 within |phi| < pi/2, by quadrature on a uniform grid.
inline double mass_near_zero(const QSpectrum& s, const Eigen::VectorXd& c, int samples = 2048) {
  double inside = 0.0, total = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double phi = -std::numbers::pi + 2.0 * std::numbers::pi * (k + 0.5) / samples;
    const double d = std::norm(s.wavefunction(c, phi));
    total += d;
    if (std::abs(phi) < 0.5 * std::numbers::pi) inside += d;
  }
  return inside / total;
}

/// Circular mean of |psi(phi)|^2, rad.
inline double circular_mean(const QSpectrum& s, const Eigen::VectorXd& c, int samples = 2048) {
  std::complex<double> m{0.0, 0.0};
  for (int k = 0; k < samples; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / samples;
    m += std::norm(s.wavefunction(c, phi)) * std::polar(1.0, phi);
  }
  return std::arg(m);
}

/// <j| cos(phi) |k> in the momentum basis.
inline double cos_matrix_element(const QSpectrum& s, int j, int k) {
  double acc = 0.0;
  const auto rows = s.V.rows();
  for (Eigen::Index r = 0; r < rows; ++r) {
    double nb = 0.0;
    if (r + 1 < rows) nb += s.V(r + 1, k);
    if (r >= 1) nb += s.V(r - 1, k);
    acc += s.V(r, j) * 0.5 * nb;
  }
  return acc;
}

struct BlockReduction {
  double E0_unperturbed = 0.0;
  double E1_unperturbed = 0.0;
  double coupling = 0.0;  // E_{0,1}, nK
  double E_lower = 0.0;
  double E_upper = 0.0;
  double A = 0.0;
  double decoupling_ratio = 0.0;  // |E_{0,1}| / (E0_2 - E0_1)
};

/// Two-level reduction of the qubit pair of a K = 0 spectrum under the cos(phi) coupling -N K cos(phi).
/// The K = 0 eigenvectors are sign-fixed as in persistent_states.
inline BlockReduction block_reduction(const QSpectrum& spec0, double K, int N, double max_ratio = 0.5) {
  if (spec0.h.K != 0.0) throw QSpecError("block_reduction: reference spectrum must have K = 0");
  if (spec0.count() < 3) throw QSpecError("block_reduction: need three reference levels");
  double c01 = cos_matrix_element(spec0, 0, 1);
  if (spec0.V.col(0).sum() * spec0.V.col(1).sum() < 0.0) c01 = -c01;
  BlockReduction b;
  b.E0_unperturbed = spec0.E[0];
  b.E1_unperturbed = spec0.E[1];
  b.coupling = -N * K * c01;
  const double d = spec0.E[1] - spec0.E[0];
  b.decoupling_ratio = std::abs(b.coupling) / (spec0.E[2] - spec0.E[1]);
  if (b.decoupling_ratio > max_ratio)
    throw QSpecError("block_reduction: qubit block not decoupled (ratio " + std::to_string(b.decoupling_ratio) + ")");
  const double root = std::sqrt(0.25 * d * d + b.coupling * b.coupling);
  b.E_lower = 0.5 * (spec0.E[0] + spec0.E[1]) - root;
  b.E_upper = 0.5 * (spec0.E[0] + spec0.E[1]) + root;
  const double w = 2.0 * b.coupling + std::sqrt(d * d + 4.0 * b.coupling * b.coupling);
  b.A = d / std::sqrt(d * d + w * w);
  return b;
}

struct MeanCurrents {
  double level0 = 0.0;
  double level1 = 0.0;
};

inline MeanCurrents mean_currents(double A, double I_p) {
  if (!(A >= 0.0 && A <= 1.0)) throw QSpecError("mean_currents: A must lie in [0, 1]");
  const double v = I_p * (1.0 - 2.0 * A * A);
  return {v, -v};
}

// ---- frequency-dependent spectra ------------------------------------------------------------

/// K(f), P_eff(f) and their f-derivatives as functions of f/f0, plus the frequency-independent
/// U_eff and N.
struct ParameterCurves {
  std::function<double(double)> K;
  std::function<double(double)> P_eff;
  std::function<double(double)> dK;
  std::function<double(double)> dP_eff;
  double U_eff = 0.0;
  int N = 0;
};

/// <j| cos(2 phi) |j>
inline double cos2_expectation(const QSpectrum& s, int j) {
  double acc = 0.0;
  const auto rows = s.V.rows();
  for (Eigen::Index r = 0; r < rows; ++r) {
    double nb = 0.0;
    if (r + 2 < rows) nb += s.V(r + 2, j);
    if (r >= 2) nb += s.V(r - 2, j);
    acc += s.V(r, j) * 0.5 * nb;
  }
  return acc;
}

/// I_j/N = -(1/(2 pi hbar N)) dE_j/d(f/f0), from the Hellmann-Feynman derivative
/// dE_j/df = -N K'(f) <cos phi>_j + (N P_eff'(f)/4) <cos 2phi>_j.
inline double level_current(const QSpectrum& s, int j, const ParameterCurves& pc, const PhysConsts& c = constants()) {
  const double f = s.f_over_f0;
  const double dE = -pc.N * pc.dK(f) * cos_matrix_element(s, j, j) + 0.25 * pc.N * pc.dP_eff(f) * cos2_expectation(s, j);
  return -dE / (2.0 * std::numbers::pi * c.hbar_over_kB * pc.N);
}

struct LevelCurrents {
  std::vector<double> f_over_f0;
  std::vector<std::vector<double>> current_per_N;  // [level][f], 1/s
  std::vector<std::vector<double>> energy;          // tracked energies, nK
  std::vector<std::size_t> ambiguous;               // f indices where tracking was ambiguous
};

/// Level currents along a frequency grid, with levels followed from one frequency to the next by
/// the largest eigenvector overlap instead of by index, so true crossings between levels of
/// opposite phi -> -phi symmetry keep their identity.
inline LevelCurrents level_currents(const std::vector<QSpectrum>& spectra, int levels, const ParameterCurves& pc,
                                    const PhysConsts& c = constants()) {
  if (spectra.empty()) throw QSpecError("level_currents: empty frequency grid");
  const std::size_t nf = spectra.size();
  LevelCurrents out;
  out.energy.assign(levels, std::vector<double>(nf));
  out.current_per_N.assign(levels, std::vector<double>(nf));
  std::vector<int> map(levels);  // tracked level -> index in current spectrum
  for (int j = 0; j < levels; ++j) map[j] = j;
  auto project = [](const QSpectrum& a, int ja, const QSpectrum& b, int jb) {
    const int na = a.n_max(), nb = b.n_max();
    const int m = std::min(na, nb);
    double s = 0.0;
    for (int n = -m; n <= m; ++n) s += a.V(n + na, ja) * b.V(n + nb, jb);
    return std::abs(s);
  };
  for (std::size_t i = 0; i < nf; ++i) {
    if (spectra[i].count() < levels) throw QSpecError("level_currents: too few levels in a spectrum");
    out.f_over_f0.push_back(spectra[i].f_over_f0);
    if (i > 0) {
      std::vector<int> next(levels, -1);
      std::vector<bool> used(spectra[i].count(), false);
      for (int j = 0; j < levels; ++j) {
        double best = -1.0, second = -1.0;
        int arg = -1;
        for (int k = 0; k < spectra[i].count(); ++k) {
          if (used[k]) continue;
          const double o = project(spectra[i - 1], map[j], spectra[i], k);
          if (o > best) {
            second = best;
            best = o;
            arg = k;
          } else if (o > second) {
            second = o;
          }
        }
        if (best - second < 1e-3) out.ambiguous.push_back(i);
        next[j] = arg;
        used[arg] = true;
      }
      map = next;
    }
    for (int j = 0; j < levels; ++j) {
      out.energy[j][i] = spectra[i].E[map[j]];
      out.current_per_N[j][i] = level_current(spectra[i], map[j], pc, c);
    }
  }
  return out;
}

inline QSpectrum spectrum_at(const ParameterCurves& pc, double f, int count = 8, int n_max = 32) {
  auto s = eigensolve(build_matrix(pc.U_eff, pc.K(f), pc.P_eff(f), pc.N, n_max), count);
  s.f_over_f0 = f;
  return s;
}

/// Semiclassical persistent-current curves of the Z = 0 states, per particle: the Z = 0
/// TM energies -K + P_eff/4 (0-state) and K + P_eff/4 (pi-state) differentiated in f.
struct PersistentCurrentCurve {
  double zero_state = 0.0;
  double pi_state = 0.0;
};

inline PersistentCurrentCurve semiclassical_currents(const ParameterCurves& pc, double f, const PhysConsts& c = constants()) {
  const double dK = pc.dK(f);
  const double dP = pc.dP_eff(f);
  const double pref = 1.0 / (2.0 * std::numbers::pi * c.hbar_over_kB);
  return {-pref * (-dK + 0.25 * dP), -pref * (dK + 0.25 * dP)};
}

struct QubitOptions {
  double pp_fraction = 0.6;  // |<I>| threshold for the persistent-current window
  double localized_fraction = 0.9;
  int n_max = 32;
  double search_halfwidth = 0.2;  // in f/f0 around the degeneracy point
};

struct QubitReport {
  double f_star = 0.5;  // f/f0 where K = 0
  double q = 0.0;
  double Q = 0.0;
  double T_osc = 0.0;         // s, pi hbar / Delta E_1
  double T_osc_asymptotic = 0.0;  // s, from asymptotic_gap
  double delta_a = 0.0;
  double delta_f_eqd_over_f0 = 0.0;
  double delta_f_pp_over_f0 = 0.0;
  double product_Q_dfpp = 0.0;
  double I_p_per_N = 0.0;           // 1/s, from the localized-branch slope
  double I_p_analytic_per_N = 0.0;  // 1/s, |dK/d(f/f0)| / (2 pi hbar)
  std::pair<double, double> eqd_roots{0.0, 0.0};
  std::pair<double, double> pp_roots{0.0, 0.0};
  ParityWeights parity_left_edge;   // ground state at the window edges
  ParityWeights parity_right_edge;
  int n_max_used = 0;
};

namespace detail {

/// Root of g on [a, b] (g(a) g(b) <= 0) by TOMS 748.
inline double bracketed_root(const std::function<double(double)>& g, double a, double b, double ga, double gb) {
  if (ga == 0.0) return a;
  if (gb == 0.0) return b;
  boost::uintmax_t it = 200;
  auto tol = [](double x, double y) { return std::abs(x - y) <= 1e-15 * std::max(std::abs(x), 1e-300) * 4; };
  const auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, tol, it);
  return 0.5 * (r.first + r.second);
}

/// Scans outward from x0 with geometrically growing steps until g changes sign, then refines.
inline double outward_root(const std::function<double(double)>& g, double x0, double dir, double first_step,
                           double max_dist) {
  double a = x0, ga = g(a);
  double step = first_step;
  while (step <= max_dist) {
    const double b = x0 + dir * step;
    const double gb = g(b);
    if (ga * gb <= 0.0) return dir > 0 ? bracketed_root(g, a, b, ga, gb) : bracketed_root(g, b, a, gb, ga);
    a = b;
    ga = gb;
    step *= 1.5;
  }
  throw QSpecError("qubit_report: no root bracket found within the search window");
}

}  // namespace detail

/// Qubit metrics around the degeneracy point f* where K(f*) = 0.
inline QubitReport qubit_report(const ParameterCurves& pc, const QubitOptions& opt = {}, const PhysConsts& c = constants()) {
  QubitReport r;
  const double hb = c.hbar_over_kB;
  // degeneracy point
  {
    const double lo = 0.5 - opt.search_halfwidth, hi = 0.5 + opt.search_halfwidth;
    const double glo = pc.K(lo), ghi = pc.K(hi);
    if (glo * ghi > 0.0) throw QSpecError("qubit_report: K(f) has no zero near f0/2");
    r.f_star = detail::bracketed_root(pc.K, lo, hi, glo, ghi);
  }
  const double P0 = pc.P_eff(r.f_star);
  if (!(P0 < 0.0)) throw QSpecError("qubit_report: P_eff must be negative at the degeneracy point");
  r.q = pc.N * std::abs(P0) / (8.0 * pc.U_eff);
  const auto s0 = eigensolve(build_matrix(pc.U_eff, 0.0, P0, pc.N, opt.n_max), 8);
  r.n_max_used = s0.n_max();
  const double dE1 = s0.E[1] - s0.E[0];
  r.Q = (s0.E[2] - s0.E[0]) / dE1;
  r.T_osc = std::numbers::pi * hb / dE1;
  r.delta_a = dE1 / pc.U_eff;
  r.T_osc_asymptotic = std::numbers::pi * hb / (pc.U_eff * asymptotic_gap(r.q));

  // equidistance of the lowest three levels
  auto eqd = [&](double f) {
    const auto s = eigensolve(build_matrix(pc.U_eff, pc.K(f), pc.P_eff(f), pc.N, opt.n_max), 8);
    return (s.E[2] - s.E[1]) - (s.E[1] - s.E[0]);
  };
  const double span = opt.search_halfwidth;
  r.eqd_roots = {detail::outward_root(eqd, r.f_star, -1.0, 1e-7, span), detail::outward_root(eqd, r.f_star, 1.0, 1e-7, span)};
  r.delta_f_eqd_over_f0 = r.eqd_roots.second - r.eqd_roots.first;

  // superposition coefficient from the two-level block at K(f)
  auto one_minus_2a2 = [&](double f, double max_ratio) {
    const auto ref = eigensolve(build_matrix(pc.U_eff, 0.0, pc.P_eff(f), pc.N, opt.n_max), 8);
    const auto b = block_reduction(ref, pc.K(f), pc.N, max_ratio);
    return 1.0 - 2.0 * b.A * b.A;
  };
  auto gpp = [&](double f) { return std::abs(one_minus_2a2(f, 0.5)) - opt.pp_fraction; };
  // first step scaled to the expected window width |K| ~ (3/8) dE1 / N
  const double dK = pc.dK(r.f_star);
  const double first = std::max(1e-14, 0.01 * 0.375 * dE1 / (pc.N * std::abs(dK)));
  r.pp_roots = {detail::outward_root(gpp, r.f_star, -1.0, first, span), detail::outward_root(gpp, r.f_star, 1.0, first, span)};
  r.delta_f_pp_over_f0 = r.pp_roots.second - r.pp_roots.first;
  r.product_Q_dfpp = r.Q * r.delta_f_pp_over_f0;
  {
    const auto sl = spectrum_at(pc, r.pp_roots.first, 8, opt.n_max);
    const auto sr = spectrum_at(pc, r.pp_roots.second, 8, opt.n_max);
    r.parity_left_edge = sl.parity(0);
    r.parity_right_edge = sr.parity(0);
  }

  // plateau current: ground-level slope just outside |1 - 2A^2| = localized_fraction. Only the
  // location of these points uses the two-level formula, so the decoupling check is relaxed here.
  auto gloc = [&](double f) { return std::abs(one_minus_2a2(f, 1e300)) - opt.localized_fraction; };
  const double xl = detail::outward_root(gloc, r.f_star, -1.0, first, span);
  const double xr = detail::outward_root(gloc, r.f_star, 1.0, first, span);
  const double w = xr - xl;
  auto ground_current = [&](double f) { return level_current(spectrum_at(pc, f, 8, opt.n_max), 0, pc, c); };
  r.I_p_per_N = 0.5 * (std::abs(ground_current(xl - 0.05 * w)) + std::abs(ground_current(xr + 0.05 * w)));
  r.I_p_analytic_per_N = std::abs(dK) / (2.0 * std::numbers::pi * hb);
  return r;
}

}  // namespace aquid

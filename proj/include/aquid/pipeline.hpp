#pragma once

// Stage drivers shared by the command-line tool and the acceptance checks: GBH curve
// persistence and interpolation, formula-level critical curves, and the quantum stage.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

// Boost 1.74's pchip calls isnan unqualified; make std::isnan visible at its definition.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <nlohmann/json.hpp>

#include "aquid/gbh.hpp"
#include "aquid/io.hpp"
#include "aquid/qspec.hpp"
#include "aquid/tmdyn.hpp"

namespace aquid {

/// Frequency-resolved GBH parameters as persisted in gbh_curve.csv plus the scalar summary.
struct CurveData {
  int N = 0;
  double f0 = 0.0;
  double U_eff = 0.0;
  double K0 = 0.0;      // K at rest, nK
  double P_eff0 = 0.0;  // P_eff at rest, nK
  std::optional<std::pair<double, double>> central_interval;
  std::vector<double> f, K, U, P, P_prime, P_eff;
};

inline CurveData curve_data(const GbhCurve& c, int N) {
  CurveData d;
  d.N = N;
  d.f0 = c.f0;
  d.U_eff = c.U_eff;
  d.K0 = c.K0;
  d.central_interval = c.central_interval;
  for (const auto& s : c.samples) {
    if (!s.error.empty() || !(s.has_p_eff || s.p_eff_interpolated)) continue;
    d.f.push_back(s.params.f_over_f0);
    d.K.push_back(s.params.K);
    d.U.push_back(s.params.U);
    d.P.push_back(s.params.P);
    d.P_prime.push_back(s.params.P_prime);
    d.P_eff.push_back(s.params.P_eff);
  }
  if (d.f.empty()) throw GbhError("curve_data: no usable samples");
  d.P_eff0 = d.f.front() == 0.0 ? d.P_eff.front() : c.P_eff0;
  return d;
}

/// Monotone cubic (PCHIP) interpolation in f/f0, linear with fewer than four samples; arguments
/// are clamped to the sampled range.
class CurveInterpolant {
 public:
  CurveInterpolant(std::vector<double> x, std::vector<double> y) : x_(x), y_(y) {
    if (x_.size() < 2) throw GbhError("interpolant: need at least two samples");
    for (std::size_t i = 1; i < x_.size(); ++i)
      if (!(x_[i] > x_[i - 1])) throw GbhError("interpolant: abscissae must increase strictly");
    if (x_.size() >= 4) pchip_.emplace(std::move(x), std::move(y));
  }

  double operator()(double x) const {
    x = std::clamp(x, x_.front(), x_.back());
    if (pchip_) return (*pchip_)(x);
    const auto i = segment(x);
    return y_[i] + (y_[i + 1] - y_[i]) * (x - x_[i]) / (x_[i + 1] - x_[i]);
  }

  double prime(double x) const {
    if (x < x_.front() || x > x_.back()) return 0.0;
    if (pchip_) return pchip_->prime(x);
    const auto i = segment(x);
    return (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
  }

 private:
  std::size_t segment(double x) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
  }

  std::vector<double> x_, y_;
  std::optional<boost::math::interpolators::pchip<std::vector<double>>> pchip_;
};

inline ParameterCurves parameter_curves(const CurveData& d) {
  auto k = std::make_shared<CurveInterpolant>(d.f, d.K);
  auto p = std::make_shared<CurveInterpolant>(d.f, d.P_eff);
  ParameterCurves pc;
  pc.K = [k](double f) { return (*k)(f); };
  pc.dK = [k](double f) { return k->prime(f); };
  pc.P_eff = [p](double f) { return (*p)(f); };
  pc.dP_eff = [p](double f) { return p->prime(f); };
  pc.U_eff = d.U_eff;
  pc.N = d.N;
  return pc;
}

inline GbhParams params_at(const CurveData& d, double f) {
  CurveInterpolant k(d.f, d.K), u(d.f, d.U), p(d.f, d.P), pp(d.f, d.P_prime), pe(d.f, d.P_eff);
  return {f, k(f), u(f), p(f), pp(f), d.U_eff, pe(f), d.N};
}

// ---- persistence ----------------------------------------------------------------------------

inline void write_gbh_curve(const std::filesystem::path& p, const GbhCurve& c) {
  CsvWriter w(p, {"f_over_f0", "K_nK", "U_nK", "P_nK", "Pprime_nK", "Ueff_nK", "Peff_nK", "in_central_interval"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& s : c.samples) {
    if (!s.error.empty()) continue;
    const bool pe = s.has_p_eff || s.p_eff_interpolated;
    w.row({s.params.f_over_f0, s.params.K, s.params.U, s.params.P, s.params.P_prime, c.U_eff, pe ? s.params.P_eff : nan,
           c.in_central_interval(s.params.f_over_f0) ? 1.0 : 0.0});
  }
}

inline nlohmann::json gbh_summary(const GbhCurve& c, int N) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : c.samples) {
    nlohmann::json j = {{"f_over_f0", s.params.f_over_f0}, {"refined", s.refined}};
    if (!s.error.empty()) {
      j["error"] = s.error;
    } else {
      j["K_nK"] = s.params.K;
      j["K_integral_nK"] = s.K_integral;
      j["overlap"] = s.overlap;
      j["P_eff_measured"] = s.has_p_eff;
      if (s.T_plus) j["T_plus_s"] = *s.T_plus;
      if (s.T_minus) j["T_minus_s"] = *s.T_minus;
      if (s.P_eff_zero) j["P_eff_zero_mode_nK"] = *s.P_eff_zero;
      if (s.P_eff_pi) j["P_eff_pi_mode_nK"] = *s.P_eff_pi;
    }
    samples.push_back(j);
  }
  nlohmann::json out = {{"N", N},
                        {"f0_Hz", c.f0},
                        {"f0_one_dim_Hz", c.f0_one_dim},
                        {"mu_gs_nK", c.mu_gs},
                        {"K0_nK", c.K0},
                        {"U_nK", c.U0},
                        {"P_nK", c.P0},
                        {"Pprime_nK", c.P_prime0},
                        {"T0_s", c.T0},
                        {"U_eff_nK", c.U_eff},
                        {"U_eff_over_U", c.U_eff / c.U0},
                        {"P_eff0_nK", c.P_eff0},
                        {"samples", samples}};
  if (const auto* h = c.at(0.5, 1e-6); h && h->error.empty() && h->has_p_eff) {
    out["P_eff_half_nK"] = h->params.P_eff;
    out["P_half_nK"] = h->params.P;
    out["P_eff_over_P"] = h->params.P_eff / h->params.P;
  }
  if (c.central_interval) {
    out["central_interval"] = {c.central_interval->first, c.central_interval->second};
    out["delta_f_over_f0"] = c.delta_f();
  }
  return out;
}

/// Reads gbh_curve.csv and gbh_summary.json from a stage directory.
inline CurveData load_curve(const std::filesystem::path& dir) {
  const auto summary = nlohmann::json::parse(read_file(dir / "gbh_summary.json"));
  CurveData d;
  d.N = summary.at("N").get<int>();
  d.f0 = summary.at("f0_Hz").get<double>();
  d.U_eff = summary.at("U_eff_nK").get<double>();
  d.K0 = summary.at("K0_nK").get<double>();
  d.P_eff0 = summary.at("P_eff0_nK").get<double>();
  if (summary.contains("central_interval"))
    d.central_interval = std::make_pair(summary["central_interval"][0].get<double>(), summary["central_interval"][1].get<double>());
  std::istringstream in(read_file(dir / "gbh_curve.csv"));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < 7 || cells[6].empty()) continue;
    d.f.push_back(std::stod(cells[0]));
    d.K.push_back(std::stod(cells[1]));
    d.U.push_back(std::stod(cells[2]));
    d.P.push_back(std::stod(cells[3]));
    d.P_prime.push_back(std::stod(cells[4]));
    d.P_eff.push_back(std::stod(cells[6]));
  }
  if (d.f.size() < 2) throw IoError("gbh_curve.csv: fewer than two usable rows");
  if (d.P_eff0 == 0.0 && d.f.front() == 0.0) d.P_eff0 = d.P_eff.front();
  return d;
}

/// Reference GBH parameters (U, P, effective ratios, I0/N) for the quantum stage without GP
/// input. K(f) follows the Sagnac form K0 cos(pi f/f0) with K0 = 2 hbar I0/N; P_eff is taken as
/// frequency independent.
struct TableParams {
  std::string name;
  int N = 0;
  double U = 0.0, P = 0.0;
  double U_eff_over_U = 0.0, P_eff_over_P = 0.0;
  double I0_per_N = 0.0;
};

inline TableParams table_params_from_json(const nlohmann::json& j) {
  TableParams t;
  try {
    t.name = j.value("name", std::string{});
    t.N = j.at("N").get<int>();
    t.U = j.at("U_nK").get<double>();
    t.P = j.at("P_nK").get<double>();
    t.U_eff_over_U = j.at("Ueff_over_U").get<double>();
    t.P_eff_over_P = j.at("Peff_over_P").get<double>();
    t.I0_per_N = j.at("I0_per_N").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("parameter file: ") + e.what());
  }
  if (t.N <= 0 || !(t.U > 0.0) || !(t.U_eff_over_U > 0.0) || !(t.I0_per_N > 0.0))
    throw ScenarioError("parameter file: N, U_nK, Ueff_over_U and I0_per_N must be positive");
  return t;
}

inline ParameterCurves parameter_curves(const TableParams& t, const PhysConsts& c = constants()) {
  const double K0 = 2.0 * c.hbar_over_kB * t.I0_per_N;
  const double pe = t.P * t.P_eff_over_P;
  ParameterCurves pc;
  pc.K = [K0](double f) { return K0 * std::cos(std::numbers::pi * f); };
  pc.dK = [K0](double f) { return -std::numbers::pi * K0 * std::sin(std::numbers::pi * f); };
  pc.P_eff = [pe](double) { return pe; };
  pc.dP_eff = [](double) { return 0.0; };
  pc.U_eff = t.U * t.U_eff_over_U;
  pc.N = t.N;
  return pc;
}

inline std::vector<double> uniform_grid(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("frequency grid needs at least one sample");
  if (n == 1) return {lo};
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
  return g;
}

// ---- formula-level critical curves ------------------------------------------------------------

inline void write_critical_curves(const std::filesystem::path& dir, const CurveData& d, const std::vector<double>& fs,
                                  const PhysConsts& c = constants()) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto jp = current_params(d.K0, d.P_eff0, c);
  CsvWriter cc(dir / "critical_curves.csv", {"f_over_f0", "Zc_0", "Zc_pi", "Ic_0_perN", "Ic_pi_perN", "Ic_sagnac_perN",
                                             "Ic_sagnac_alpha0_perN"});
  CsvWriter inter(dir / "interference.csv", {"f_over_f0", "Il_perN", "minus_Ir_perN"});
  for (double f : fs) {
    const GbhParams p = params_at(d, f);
    std::optional<double> z0, zp;
    try {
      const auto zc = critical_imbalance(p);
      z0 = zc.zero_mode;
      zp = zc.pi_mode;
    } catch (const TmError&) {
    }
    const auto ic = critical_current_gbh(p, c);
    const auto sg = critical_current_sagnac(jp, f);
    cc.row({f, z0.value_or(nan), zp.value_or(nan), ic.zero_mode.value_or(nan), ic.pi_mode.value_or(nan), sg.exact,
            sg.alpha0_limit});
    const int n = f <= 0.5 ? 0 : 1;
    const auto pair = interference_decomposition(sg.phi, sagnac_phase(f, n), jp, n);
    inter.row({f, pair.I_l, -pair.I_r});
  }
}

/// GP-measured critical point at one frequency: the state is seeded just inside the separatrix,
/// at Z = 0 and a phase offset `margin` from the saddle, and propagated for `periods` estimated
/// libration periods. max|Z| approximates Z_c and the largest net current through the y = 0 cut
/// the critical current.
struct GpCriticalPoint {
  double f_over_f0 = 0.0;
  Mode mode = Mode::zero;
  double max_abs_z = 0.0;
  double max_current_per_N = 0.0;
  std::vector<EvolveSample> series;
};

inline GpCriticalPoint gp_critical_point(const GpSolver& gp, const FrequencyPoint& fp, Mode mode, const GbhParams& p,
                                         double margin = 0.02, double periods = 1.5) {
  double saddle = mode == Mode::zero ? std::numbers::pi : 0.0;
  if (in_central_regime(p)) saddle = std::acos(p.K / p.P_eff);
  const double centre = mode == Mode::zero ? 0.0 : std::numbers::pi;
  const double phi0 = saddle + (centre > saddle ? margin : -margin);
  const double curv = mode == Mode::zero ? p.K - p.P_eff : -p.K - p.P_eff;
  if (!(curv > 0.0)) throw GbhError("gp_critical_point: requested mode is not a minimum");
  const double t_small = tm_small_period(p.U_eff, curv, p.N, gp.consts());
  OrderParameter psi = gp.make_tm(0.0, phi0, fp.modes);
  EvolveOptions eo;
  eo.dt = gp.config().dt_real;
  eo.t_final = periods * 3.0 * t_small;  // near-separatrix librations are several small periods long
  eo.sample_every = std::max(1, static_cast<int>(std::lround(t_small / 400.0 / eo.dt)));
  eo.energy_every = 50;
  eo.modes = &fp.modes;
  GpCriticalPoint r;
  r.f_over_f0 = p.f_over_f0;
  r.mode = mode;
  r.series = gp.evolve_real(psi, eo);
  for (const auto& s : r.series) {
    r.max_abs_z = std::max(r.max_abs_z, std::abs(s.z));
    r.max_current_per_N = std::max(r.max_current_per_N, std::abs(s.current));
  }
  return r;
}

// ---- quantum stage --------------------------------------------------------------------------

inline nlohmann::json to_json(const QubitReport& r) {
  return {{"f_star_over_f0", r.f_star},
          {"q", r.q},
          {"Q", r.Q},
          {"T_osc_s", r.T_osc},
          {"T_osc_asymptotic_s", r.T_osc_asymptotic},
          {"delta_a", r.delta_a},
          {"delta_f_eqd_over_f0", r.delta_f_eqd_over_f0},
          {"delta_f_pp_over_f0", r.delta_f_pp_over_f0},
          {"Q_times_delta_f_pp_over_f0", r.product_Q_dfpp},
          {"I_p_per_N", r.I_p_per_N},
          {"I_p_analytic_per_N", r.I_p_analytic_per_N},
          {"eqd_roots", {r.eqd_roots.first, r.eqd_roots.second}},
          {"pp_roots", {r.pp_roots.first, r.pp_roots.second}},
          {"ground_parity_weights_left_edge", {{"even", r.parity_left_edge.even}, {"odd", r.parity_left_edge.odd}}},
          {"ground_parity_weights_right_edge", {{"even", r.parity_right_edge.even}, {"odd", r.parity_right_edge.odd}}},
          {"n_max", r.n_max_used}};
}

struct QubitOutputs {
  QubitReport report;
  std::vector<QSpectrum> spectra;
  LevelCurrents currents;
};

/// spectrum.csv (E0..E7), levels_currents.csv (I0..I4 per particle) and qubit_report.json.
/// `provenance` is merged into the report (upstream digests, scenario hash).
inline QubitOutputs run_qubit_stage(const std::filesystem::path& dir, const ParameterCurves& pc, const std::vector<double>& fs,
                                    const nlohmann::json& provenance, const QubitOptions& opt = {}) {
  QubitOutputs out;
  out.report = qubit_report(pc, opt);
  for (double f : fs) out.spectra.push_back(spectrum_at(pc, f, 8, opt.n_max));
  out.currents = level_currents(out.spectra, 5, pc);
  {
    CsvWriter w(dir / "spectrum.csv", {"f_over_f0", "E0_nK", "E1_nK", "E2_nK", "E3_nK", "E4_nK", "E5_nK", "E6_nK", "E7_nK"});
    for (const auto& s : out.spectra) {
      std::vector<double> row{s.f_over_f0};
      for (int j = 0; j < 8; ++j) row.push_back(s.E[j]);
      w.row(row);
    }
  }
  {
    CsvWriter w(dir / "levels_currents.csv", {"f_over_f0", "I0_perN", "I1_perN", "I2_perN", "I3_perN", "I4_perN"});
    for (std::size_t i = 0; i < fs.size(); ++i) {
      std::vector<double> row{out.currents.f_over_f0[i]};
      for (int j = 0; j < 5; ++j) row.push_back(out.currents.current_per_N[j][i]);
      w.row(row);
    }
  }
  nlohmann::json rep = to_json(out.report);
  rep["U_eff_nK"] = pc.U_eff;
  rep["N"] = pc.N;
  rep["tracking_ambiguities"] = out.currents.ambiguous.size();
  rep["provenance"] = provenance;
  write_json(dir / "qubit_report.json", rep);
  return out;
}

}  // namespace aquid

#pragma once

// Physical constants, unit system and scenario configuration.
//
// Units used throughout the library:
//   energy     E/k_B in nK
//   length     um
//   time       s
//   frequency  Hz (angular frequencies in rad/s)
// hbar only ever appears as hbar/k_B (nK s) or hbar^2/(2 m k_B) (nK um^2).

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace aquid {

struct PhysConsts {
  double hbar_over_kB;         // nK s
  double hbar2_over_2mkB;      // nK um^2, 87Rb
  double scattering_length_a;  // um
  double bohr_radius;          // um
  double mass_m;               // kg

  /// hbar/m in um^2/s.
  [[nodiscard]] double hbar_over_m() const { return 2.0 * hbar2_over_2mkB / hbar_over_kB; }
};

namespace codata {
inline constexpr double hbar = 1.054571817e-34;         // J s
inline constexpr double kB = 1.380649e-23;              // J/K
inline constexpr double atomic_mass = 1.66053906660e-27;  // kg
inline constexpr double bohr_radius_m = 5.29177210903e-11;
inline constexpr double rb87_mass_u = 86.909;
inline constexpr double rb87_scattering_bohr = 98.98;
}  // namespace codata

inline PhysConsts constants() {
  using namespace codata;
  const double m = rb87_mass_u * atomic_mass;
  PhysConsts c{};
  c.hbar_over_kB = hbar / kB * 1e9;                      // K s -> nK s
  c.hbar2_over_2mkB = hbar * hbar / (2.0 * m * kB) * 1e21;  // K m^2 -> nK um^2
  c.bohr_radius = bohr_radius_m * 1e6;
  c.scattering_length_a = rb87_scattering_bohr * c.bohr_radius;
  c.mass_m = m;
  return c;
}

struct EffectiveCoupling {
  double g2d;  // nK um^2
};

/// g = g3D (m omega_z / 2 pi hbar)^(1/2) with g3D = 4 pi hbar^2 a / m.
inline EffectiveCoupling coupling_2d(const PhysConsts& c, double omega_z) {
  if (!(omega_z > 0.0)) throw std::invalid_argument("coupling_2d: omega_z must be positive");
  const double hbar2_over_m = 2.0 * c.hbar2_over_2mkB;  // nK um^2
  const double g3d = 4.0 * std::numbers::pi * hbar2_over_m * c.scattering_length_a;
  const double inv_len2 = omega_z / c.hbar_over_m() / (2.0 * std::numbers::pi);  // um^-2
  return {g3d * std::sqrt(inv_len2)};
}

/// One-dimensional ring period hbar/(2 pi m r0^2), Hz.
inline double f0_one_dim(const PhysConsts& c, double r0) {
  if (!(r0 > 0.0)) throw std::invalid_argument("f0_one_dim: r0 must be positive");
  return c.hbar_over_m() / (2.0 * std::numbers::pi * r0 * r0);
}

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  std::string name = "scenario";
  double V0 = 0;         // nK
  double r0 = 0;         // um
  double w = 0;          // um, 1/e^2 width
  double Vb = 0;         // nK
  double lambda_b = 0;   // um, 1/e width
  double omega_z = 0;    // rad/s
  int N = 0;
  int grid_points_per_axis = 257;
  double box_half_length = 0;  // um
  double dt_imag = 1e-6;       // s
  double dt_real = 1e-6;       // s
  double convergence_tol = 1e-6;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Throws ScenarioError naming the first violated bound.
inline void validate(const ScenarioConfig& s) {
  auto fail = [](const std::string& msg) { throw ScenarioError("invalid scenario: " + msg); };
  if (!(s.Vb > 0.0)) fail("barrier.Vb_nK must be > 0");
  if (!(s.V0 > s.Vb)) fail("barrier.Vb_nK must be below trap.V0_nK (V0 > Vb)");
  if (!(s.w > 0.0)) fail("trap.w_um must be > 0");
  if (!(s.r0 > s.w)) fail("trap.r0_um must exceed trap.w_um (r0 > w)");
  if (!(s.lambda_b > 0.0)) fail("barrier.lambda_b_um must be > 0");
  if (!(s.omega_z > 0.0)) fail("trap.omega_z_rad_s must be > 0");
  if (s.N < 2) fail("condensate.N must be >= 2");
  if (s.N % 2 != 0) fail("condensate.N must be even (parity analysis requires even N)");
  if (s.grid_points_per_axis < 5) fail("numerics.grid_points_per_axis must be >= 5");
  if (s.grid_points_per_axis % 2 == 0) fail("numerics.grid_points_per_axis must be odd (node on each axis)");
  if (!(s.box_half_length > s.r0)) fail("numerics.box_half_length_um must exceed r0");
  if (!(s.dt_imag > 0.0)) fail("numerics.dt_imag_s must be > 0");
  if (!(s.dt_real > 0.0)) fail("numerics.dt_real_s must be > 0");
  if (!(s.convergence_tol > 0.0)) fail("numerics.convergence_tol must be > 0");
}

inline nlohmann::json to_json(const ScenarioConfig& s) {
  return {
      {"name", s.name},
      {"trap", {{"V0_nK", s.V0}, {"r0_um", s.r0}, {"w_um", s.w}, {"omega_z_rad_s", s.omega_z}}},
      {"barrier", {{"Vb_nK", s.Vb}, {"lambda_b_um", s.lambda_b}}},
      {"condensate", {{"N", s.N}}},
      {"numerics",
       {{"grid_points_per_axis", s.grid_points_per_axis},
        {"box_half_length_um", s.box_half_length},
        {"dt_imag_s", s.dt_imag},
        {"dt_real_s", s.dt_real},
        {"convergence_tol", s.convergence_tol}}},
  };
}

inline std::string serialize(const ScenarioConfig& s) { return to_json(s).dump(2); }

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  auto get = [&](const char* section, const char* key) -> const nlohmann::json& {
    if (!j.contains(section) || !j.at(section).is_object())
      throw ScenarioError(std::string("missing section '") + section + "'");
    const auto& sec = j.at(section);
    if (!sec.contains(key)) throw ScenarioError(std::string("missing field '") + section + "." + key + "'");
    const auto& v = sec.at(key);
    if (!v.is_number()) throw ScenarioError(std::string("field '") + section + "." + key + "' must be a number");
    return v;
  };
  ScenarioConfig s;
  if (j.contains("name")) s.name = j.at("name").get<std::string>();
  s.V0 = get("trap", "V0_nK").get<double>();
  s.r0 = get("trap", "r0_um").get<double>();
  s.w = get("trap", "w_um").get<double>();
  s.omega_z = get("trap", "omega_z_rad_s").get<double>();
  s.Vb = get("barrier", "Vb_nK").get<double>();
  s.lambda_b = get("barrier", "lambda_b_um").get<double>();
  const auto& n = get("condensate", "N");
  if (!n.is_number_integer()) throw ScenarioError("field 'condensate.N' must be an integer");
  s.N = n.get<int>();
  const auto& g = get("numerics", "grid_points_per_axis");
  if (!g.is_number_integer()) throw ScenarioError("field 'numerics.grid_points_per_axis' must be an integer");
  s.grid_points_per_axis = g.get<int>();
  s.box_half_length = get("numerics", "box_half_length_um").get<double>();
  s.dt_imag = get("numerics", "dt_imag_s").get<double>();
  s.dt_real = get("numerics", "dt_real_s").get<double>();
  s.convergence_tol = get("numerics", "convergence_tol").get<double>();
  validate(s);
  return s;
}

/// Parses a JSON scenario document.
inline ScenarioConfig load_scenario(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(std::string("parse error: ") + e.what());
  }
  if (!j.is_object()) throw ScenarioError("parse error: top level must be an object");
  return scenario_from_json(j);
}

/// The condensates studied: ring depth 82 nK, width 1.7065 um, barrier 42 nK / 1.26118 um,
/// omega_z = 2 pi 297 Hz. Box half-length defaults to r0 + 4w.
inline ScenarioConfig reference_scenario(double r0, int N, std::string name, int grid = 257) {
  ScenarioConfig s;
  s.name = std::move(name);
  s.V0 = 82.0;
  s.r0 = r0;
  s.w = 1.7065;
  s.Vb = 42.0;
  s.lambda_b = 1.26118;
  s.omega_z = 2.0 * std::numbers::pi * 297.0;
  s.N = N;
  s.grid_points_per_axis = grid;
  s.box_half_length = r0 + 4.0 * s.w;
  return s;
}

}  // namespace aquid

// aquid: ring-condensate interferometer pipeline (GP -> GBH -> two-mode -> quantum).

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "aquid/pipeline.hpp"

namespace fs = std::filesystem;
using namespace aquid;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 2, kConvergence = 3, kPartial = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Args {
  std::string command;
  std::string scenario;
  std::string out = "aquid_out";
  std::optional<int> grid;
  double fmin = 0.0, fmax = 1.0;
  std::optional<int> fsamples;
  bool gp_points = false;
  std::string table5;
  // extras
  double f = 0.0;
  std::string state = "both";
  std::optional<double> f0;
  bool k_only = false;
  double evolve = 0.0;
  double z_seed = 0.02;
  bool quiet = false;
};

void log(const Args& a, const std::string& m) {
  if (a.quiet) return;
  std::time_t t = std::time(nullptr);
  char buf[16];
  std::strftime(buf, sizeof buf, "%H:%M:%S", std::localtime(&t));
  std::cerr << "[" << buf << "] " << m << std::endl;
}

RelaxOptions relax_options() {
  RelaxOptions r;
  r.energy_tol = 1e-7;  // the conjugate-gradient polish finishes convergence
  return r;
}

struct Context {
  Args args;
  fs::path dir;
  std::optional<ScenarioConfig> cfg;
  std::string scenario_hash;
  std::optional<RunManifest> manifest;

  const ScenarioConfig& scenario() const {
    if (!cfg) throw UsageError("--scenario is required for this command");
    return *cfg;
  }
};

void merge_previous_manifest(Context& ctx) {
  const fs::path p = ctx.dir / "manifest.json";
  if (!fs::exists(p)) return;
  try {
    const auto j = nlohmann::json::parse(read_file(p));
    const auto stages = j.value("stages", nlohmann::json::array());
    for (const auto& s : stages) {
      const std::string st = s.value("status", "ok");
      ctx.manifest->add_stage({s.value("name", ""),
                               st == "ok" ? StageStatus::ok : st == "partial" ? StageStatus::partial
                                          : st == "failed"                 ? StageStatus::failed
                                                                           : StageStatus::skipped,
                               s.value("wall_seconds", 0.0), s.value("message", "")});
    }
    const auto files = j.value("files", nlohmann::json::object());
    for (const auto& [name, digest] : files.items())
      if (fs::exists(ctx.dir / name)) ctx.manifest->add_file(ctx.dir / name);
  } catch (const std::exception&) {
    // unreadable previous manifest: start afresh
  }
}

std::string fname(const std::string& stem, double f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_f%.4f", stem.c_str(), f);
  return buf;
}

double resolve_f0(const Context& ctx, const GpSolver& gp) {
  if (ctx.args.f0) return *ctx.args.f0;
  const fs::path summary = ctx.dir / "gbh_summary.json";
  if (fs::exists(summary)) return nlohmann::json::parse(read_file(summary)).at("f0_Hz").get<double>();
  log(ctx.args, "searching f0 (no gbh_summary.json and no --f0)");
  return f0_numeric(gp, 1e-4, relax_options()).f0;
}

// ---- stages ---------------------------------------------------------------------------------

int cmd_stationary(Context& ctx) {
  StageTimer timer;
  const auto& a = ctx.args;
  GpSolver gp(ctx.scenario());
  const double f0 = a.f == 0.0 && a.evolve == 0.0 ? 0.0 : resolve_f0(ctx, gp);
  const double omega = gp.omega_from_ratio(a.f, f0);
  std::vector<PhaseLabel> which;
  if (a.state == "zero" || a.state == "both") which.push_back(PhaseLabel::zero);
  if (a.state == "pi" || a.state == "both") which.push_back(PhaseLabel::pi);
  if (which.empty()) throw UsageError("--state must be zero, pi or both");
  if (a.evolve > 0.0 && which.size() != 2) throw UsageError("--evolve needs --state both (modes use the pair)");
  std::vector<StationaryState> states;
  for (auto w : which) {
    log(a, std::string("relaxing ") + to_string(w) + "-state at f/f0 = " + std::to_string(a.f));
    states.push_back(gp.stationary(w, omega, nullptr, relax_options()));
    const auto& s = states.back();
    const std::string stem = fname(std::string("stationary_") + to_string(w), a.f);
    write_snapshot(ctx.dir / (stem + ".bin"), s.psi, static_cast<std::int64_t>(std::time(nullptr)));
    auto side = sidecar(s);
    side["f_over_f0"] = a.f;
    side["mu_over_Vb"] = s.mu / ctx.scenario().Vb;
    write_json(ctx.dir / (stem + ".json"), side);
    ctx.manifest->add_file(ctx.dir / (stem + ".bin"));
    ctx.manifest->add_file(ctx.dir / (stem + ".json"));
    std::printf("%s-state: mu = %.6f nK (mu/Vb = %.5f), E/N = %.9f nK, winding = %d, residual = %.2e\n", to_string(w), s.mu,
                s.mu / ctx.scenario().Vb, s.energy_per_particle, s.winding, s.residual);
  }
  if (a.evolve > 0.0) {
    const auto modes = localized_modes(gp, states[0], states[1]);
    OrderParameter psi = gp.make_tm(a.z_seed, 0.0, modes);
    EvolveOptions eo;
    eo.dt = ctx.scenario().dt_real;
    eo.t_final = a.evolve;
    eo.sample_every = std::max(1, static_cast<int>(std::lround(a.evolve / 2000.0 / eo.dt)));
    eo.energy_every = 1;
    eo.modes = &modes;
    log(a, "real-time run of " + std::to_string(a.evolve) + " s");
    const auto series = gp.evolve_real(psi, eo);
    const fs::path p = ctx.dir / (fname("timeseries", a.f) + ".csv");
    write_time_series(p, series);
    ctx.manifest->add_file(p);
  }
  ctx.manifest->add_stage({"stationary", StageStatus::ok, timer.seconds(), ""});
  return kOk;
}

int cmd_gbh(Context& ctx) {
  StageTimer timer;
  const auto& a = ctx.args;
  const auto& cfg = ctx.scenario();
  const int n = a.fsamples.value_or(9);
  if (n < 1) throw UsageError("--fsamples must be >= 1");
  GpSolver gp(cfg);
  SweepOptions so;
  so.relax = relax_options();
  so.period.dt = cfg.dt_real;
  so.f0 = a.f0;
  so.log = [&](const std::string& m) { log(a, m); };
  if (a.k_only) {
    so.periods = false;
    so.period_points = {0.5};
    so.refine_with_periods = false;
  }
  GbhSweeper sweeper(gp, so);
  const auto curve = sweeper.run(uniform_grid(a.fmin, a.fmax, n));
  write_gbh_curve(ctx.dir / "gbh_curve.csv", curve);
  write_json(ctx.dir / "gbh_summary.json", gbh_summary(curve, cfg.N));
  ctx.manifest->add_file(ctx.dir / "gbh_curve.csv");
  ctx.manifest->add_file(ctx.dir / "gbh_summary.json");
  int failed = 0;
  for (const auto& s : curve.samples) failed += !s.error.empty();
  std::printf("f0 = %.5f Hz, U_eff/U = %.5f, central interval width = %.5f f0, %d failed samples\n", curve.f0,
              curve.U_eff / curve.U0, curve.delta_f(), failed);
  ctx.manifest->add_stage({"gbh", failed ? StageStatus::partial : StageStatus::ok, timer.seconds(),
                           failed ? std::to_string(failed) + " frequency samples failed" : ""});
  return failed ? kPartial : kOk;
}

CurveData require_curve(const Context& ctx) {
  if (!fs::exists(ctx.dir / "gbh_curve.csv") || !fs::exists(ctx.dir / "gbh_summary.json"))
    throw UsageError("no GBH curve in " + ctx.dir.string() + " (run `aquid gbh` first)");
  return load_curve(ctx.dir);
}

int cmd_critical(Context& ctx) {
  StageTimer timer;
  const auto& a = ctx.args;
  const CurveData d = require_curve(ctx);
  const auto fsamp = uniform_grid(a.fmin, a.fmax, a.fsamples.value_or(201));
  write_critical_curves(ctx.dir, d, fsamp);
  ctx.manifest->add_file(ctx.dir / "critical_curves.csv");
  ctx.manifest->add_file(ctx.dir / "interference.csv");
  int failed = 0;
  if (a.gp_points) {
    GpSolver gp(ctx.scenario());
    CsvWriter w(ctx.dir / "gp_critical_points.csv",
                {"f_over_f0", "mode_pi", "Zc_gp", "Zc_formula", "Ic_gp_perN", "Ic_formula_perN"});
    for (double f : d.f) {
      if (f < a.fmin - 1e-12 || f > a.fmax + 1e-12) continue;
      const GbhParams p = params_at(d, f);
      for (Mode m : {Mode::zero, Mode::pi}) {
        const double curv = m == Mode::zero ? p.K - p.P_eff : -p.K - p.P_eff;
        if (!(curv > 0.0)) continue;
        try {
          log(a, "GP critical point at f/f0 = " + std::to_string(f) + (m == Mode::zero ? " (0-mode)" : " (pi-mode)"));
          const auto fp = analyze_frequency(gp, f, d.f0, nullptr, relax_options());
          const auto r = gp_critical_point(gp, fp, m, p);
          const auto zc = critical_imbalance(p);
          const auto ic = critical_current_gbh(p);
          const auto zf = m == Mode::zero ? zc.zero_mode : zc.pi_mode;
          const auto cf = m == Mode::zero ? ic.zero_mode : ic.pi_mode;
          const double nan = std::numeric_limits<double>::quiet_NaN();
          w.row({f, m == Mode::pi ? 1.0 : 0.0, r.max_abs_z, zf.value_or(nan), r.max_current_per_N, cf.value_or(nan)});
        } catch (const std::exception& e) {
          ++failed;
          log(a, std::string("GP critical point failed: ") + e.what());
        }
      }
    }
  }
  if (a.gp_points) ctx.manifest->add_file(ctx.dir / "gp_critical_points.csv");
  ctx.manifest->add_stage({"critical", failed ? StageStatus::partial : StageStatus::ok, timer.seconds(),
                           failed ? std::to_string(failed) + " GP critical points failed" : ""});
  return failed ? kPartial : kOk;
}

int cmd_qubit(Context& ctx) {
  StageTimer timer;
  const auto& a = ctx.args;
  nlohmann::json prov;
  if (!ctx.scenario_hash.empty()) prov["scenario_sha256"] = ctx.scenario_hash;
  ParameterCurves pc;
  if (!a.table5.empty()) {
    const std::string text = read_file(a.table5);
    prov["parameter_file"] = fs::path(a.table5).filename().string();
    prov["parameter_file_sha256"] = sha256_bytes(text);
    prov["K_model"] = "K0 cos(pi f/f0), K0 = 2 hbar I0/N; P_eff constant";
    pc = parameter_curves(table_params_from_json(nlohmann::json::parse(text)));
  } else {
    const CurveData d = require_curve(ctx);
    prov["gbh_curve_sha256"] = sha256_file(ctx.dir / "gbh_curve.csv");
    prov["gbh_summary_sha256"] = sha256_file(ctx.dir / "gbh_summary.json");
    pc = parameter_curves(d);
  }
  const auto out = run_qubit_stage(ctx.dir, pc, uniform_grid(a.fmin, a.fmax, a.fsamples.value_or(401)), prov);
  for (const char* f : {"spectrum.csv", "levels_currents.csv", "qubit_report.json"}) ctx.manifest->add_file(ctx.dir / f);
  const auto& r = out.report;
  std::printf("q = %.5g, Q = %.5g, T = %.5g s (asymptotic %.5g s), df_eqd = %.4g f0, df_pp = %.4g f0, Q*df_pp = %.4g\n", r.q,
              r.Q, r.T_osc, r.T_osc_asymptotic, r.delta_f_eqd_over_f0, r.delta_f_pp_over_f0, r.product_Q_dfpp);
  ctx.manifest->add_stage({"qubit", StageStatus::ok, timer.seconds(), ""});
  return kOk;
}

int dispatch(Context& ctx) {
  const auto& c = ctx.args.command;
  if (c == "stationary") return cmd_stationary(ctx);
  if (c == "gbh") return cmd_gbh(ctx);
  if (c == "critical") return cmd_critical(ctx);
  if (c == "qubit") return cmd_qubit(ctx);
  // all: stationary at rest, sweep, formula curves, quantum stage
  int worst = kOk;
  ctx.args.f = 0.0;
  worst = std::max(worst, cmd_stationary(ctx));
  worst = std::max(worst, cmd_gbh(ctx));
  const auto saved = ctx.args.fsamples;
  ctx.args.fsamples.reset();
  worst = std::max(worst, cmd_critical(ctx));
  worst = std::max(worst, cmd_qubit(ctx));
  ctx.args.fsamples = saved;
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ring-condensate interferometer pipeline"};
  app.set_version_flag("--version", kVersion);
  Args a;
  app.add_option("command", a.command, "stationary | gbh | critical | qubit | all")
      ->required()
      ->check(CLI::IsMember({"stationary", "gbh", "critical", "qubit", "all"}));
  app.add_option("--scenario", a.scenario, "scenario JSON file");
  app.add_option("--out", a.out, "output directory")->capture_default_str();
  app.add_option("--grid", a.grid, "grid points per axis (odd), overrides the scenario");
  app.add_option("--fmin", a.fmin, "lowest f/f0")->capture_default_str();
  app.add_option("--fmax", a.fmax, "highest f/f0")->capture_default_str();
  app.add_option("--fsamples", a.fsamples, "number of frequencies (gbh 9, critical 201, qubit 401)");
  app.add_flag("--gp-points", a.gp_points, "critical: also measure critical points by GP propagation");
  app.add_option("--table5-fast", a.table5, "qubit: reference GBH parameter JSON (N, U, P, ratios, I0/N) instead of a GBH curve");
  app.add_option("--f", a.f, "stationary: f/f0")->capture_default_str();
  app.add_option("--state", a.state, "stationary: zero | pi | both")->capture_default_str();
  app.add_option("--f0", a.f0, "skip the f0 search (Hz)");
  app.add_flag("--k-only", a.k_only, "gbh: measure P_eff only at f0/2 and interpolate elsewhere");
  app.add_option("--evolve", a.evolve, "stationary: real-time run length (s) from tm(z-seed, 0)");
  app.add_option("--z-seed", a.z_seed, "stationary: imbalance of the real-time seed")->capture_default_str();
  app.add_flag("--quiet", a.quiet, "no progress log");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  Context ctx;
  ctx.args = a;
  ctx.dir = a.out;
  try {
    if (a.fsamples && *a.fsamples < 1) throw UsageError("--fsamples must be >= 1");
    if (!(a.fmax >= a.fmin)) throw UsageError("--fmax must not be below --fmin");
    if (!a.scenario.empty()) {
      const std::string text = read_file(a.scenario);
      ScenarioConfig cfg = load_scenario(text);
      if (a.grid) {
        cfg.grid_points_per_axis = *a.grid;
        validate(cfg);
      }
      ctx.cfg = cfg;
      ctx.scenario_hash = sha256_bytes(text);
    } else if (!(a.command == "qubit" && !a.table5.empty()) && a.command != "critical" && a.command != "qubit") {
      throw UsageError("--scenario is required for `" + a.command + "`");
    }
    fs::create_directories(ctx.dir);
    ctx.manifest.emplace(ctx.dir, ctx.scenario_hash, kVersion);
    merge_previous_manifest(ctx);
    int code = kOk;
    try {
      code = dispatch(ctx);
    } catch (...) {
      ctx.manifest->add_stage({a.command, StageStatus::failed, 0.0, "see error output"});
      ctx.manifest->write();
      throw;
    }
    ctx.manifest->write();
    return code;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure in `" << a.command << "`: " << e.what() << '\n';
    return kConvergence;
  } catch (const std::exception& e) {
    std::cerr << "failure in `" << a.command << "`: " << e.what() << '\n';
    return kConvergence;
  }
}

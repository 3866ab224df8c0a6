#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "aquid/io.hpp"
#include "aquid/pipeline.hpp"

using namespace aquid;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("aquid_test_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

GbhCurve synthetic_curve() {
  GbhCurve c;
  c.f0 = 7.96;
  c.f0_one_dim = 7.85;
  c.K0 = 6e-3;
  c.U0 = 0.0143;
  c.U_eff = 0.0117;
  c.P0 = -0.046;
  c.P_eff0 = 1.6e-4;
  for (int i = 0; i <= 10; ++i) {
    GbhSample s;
    const double f = i / 10.0;
    s.params = {f, c.K0 * std::cos(std::numbers::pi * f), c.U0, c.P0, 0.001, c.U_eff, -7e-4 + 8.6e-4 * std::pow(std::cos(std::numbers::pi * f), 2), 3000};
    s.has_p_eff = i % 3 != 1;
    if (i == 4) s.error = "relaxation failed";
    c.samples.push_back(s);
  }
  fill_p_eff(c.samples);
  c.central_interval = central_interval(c.samples);
  return c;
}

}  // namespace

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_bytes(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_bytes("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  TempDir d;
  const auto p = d.path() / "x.txt";
  std::ofstream(p) << "abc";
  EXPECT_EQ(sha256_file(p), sha256_bytes("abc"));
  EXPECT_THROW(read_file(d.path() / "missing"), IoError);
}

TEST(Csv, FormatAndNan) {
  TempDir d;
  {
    CsvWriter w(d.path() / "a.csv", {"x", "y"});
    w.row({0.1, std::numeric_limits<double>::quiet_NaN()});
    w.row({1e-20, -3.0});
    EXPECT_THROW(w.row({1.0}), IoError);
  }
  EXPECT_EQ(read_file(d.path() / "a.csv"), "x,y\n0.1,\n1e-20,-3\n");
}

TEST(Snapshot, RoundTripAndRejection) {
  TempDir d;
  OrderParameter op{Grid2D(9, 2.0), Field(64), 3.5};
  for (std::size_t i = 0; i < op.psi.size(); ++i) op.psi[i] = {std::sin(1.0 * i), std::cos(0.3 * i)};
  write_snapshot(d.path() / "s.bin", op, 1700000000);
  const auto s = read_snapshot(d.path() / "s.bin");
  EXPECT_EQ(s.n, 8);
  EXPECT_EQ(s.L, 2.0);
  EXPECT_EQ(s.omega, 3.5);
  EXPECT_EQ(s.timestamp, 1700000000);
  EXPECT_EQ(s.psi, op.psi);
  EXPECT_EQ(fs::file_size(d.path() / "s.bin"), 8u + 4 + 8 + 8 + 8 + 64 * 16);
  std::ofstream(d.path() / "bad.bin") << "NOTASNAP";
  EXPECT_THROW(read_snapshot(d.path() / "bad.bin"), IoError);
  fs::resize_file(d.path() / "s.bin", 100);
  EXPECT_THROW(read_snapshot(d.path() / "s.bin"), IoError);
}

TEST(Manifest, RecordsDigestsAndStages) {
  TempDir d;
  fs::create_directories(d.path() / "gbh");
  std::ofstream(d.path() / "gbh" / "a.csv") << "abc";
  RunManifest m(d.path(), "deadbeef", "0.1.0");
  EXPECT_EQ(m.add_file(d.path() / "gbh" / "a.csv"), sha256_bytes("abc"));
  m.add_stage({"gbh", StageStatus::partial, 1.5, "2 points failed"});
  m.write();
  const auto j = nlohmann::json::parse(read_file(d.path() / "manifest.json"));
  EXPECT_EQ(j["files"]["gbh/a.csv"], sha256_bytes("abc"));
  EXPECT_EQ(j["stages"][0]["status"], "partial");
  EXPECT_EQ(j["scenario_sha256"], "deadbeef");
}

TEST(Interpolant, PchipAndLinear) {
  const CurveInterpolant lin({0.0, 1.0, 2.0}, {0.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(lin(0.5), 1.0);
  EXPECT_DOUBLE_EQ(lin(1.5), 2.5);
  EXPECT_DOUBLE_EQ(lin(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(lin.prime(1.5), 1.0);
  EXPECT_EQ(lin.prime(3.0), 0.0);
  std::vector<double> x, y;
  for (int i = 0; i <= 20; ++i) x.push_back(i / 20.0), y.push_back(std::cos(std::numbers::pi * x.back()));
  const CurveInterpolant pc(x, y);
  for (double t : {0.13, 0.5, 0.77}) {
    EXPECT_NEAR(pc(t), std::cos(std::numbers::pi * t), 2e-3);
    EXPECT_NEAR(pc.prime(t), -std::numbers::pi * std::sin(std::numbers::pi * t), 3e-2);
  }
  // monotone data stays monotone
  double prev = pc(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double v = pc(i / 1000.0);
    EXPECT_LE(v, prev + 1e-15);
    prev = v;
  }
  EXPECT_THROW(CurveInterpolant({0.0, 0.0}, {1.0, 2.0}), GbhError);
  EXPECT_THROW(CurveInterpolant({0.0}, {1.0}), GbhError);
}

TEST(CurveFiles, RoundTrip) {
  TempDir d;
  const auto c = synthetic_curve();
  ASSERT_TRUE(c.central_interval);
  write_gbh_curve(d.path() / "gbh_curve.csv", c);
  write_json(d.path() / "gbh_summary.json", gbh_summary(c, 3000));
  const auto back = load_curve(d.path());
  const auto direct = curve_data(c, 3000);
  EXPECT_EQ(back.N, 3000);
  EXPECT_EQ(back.f0, c.f0);
  ASSERT_EQ(back.f.size(), direct.f.size());
  EXPECT_EQ(back.f.size(), 10u);  // the failed point is dropped
  for (std::size_t i = 0; i < back.f.size(); ++i) {
    EXPECT_NEAR(back.f[i], direct.f[i], 1e-12);
    EXPECT_NEAR(back.K[i], direct.K[i], 1e-14);
    EXPECT_NEAR(back.P_eff[i], direct.P_eff[i], 1e-14);
  }
  EXPECT_NEAR(back.central_interval->first, c.central_interval->first, 1e-12);
  const auto j = nlohmann::json::parse(read_file(d.path() / "gbh_summary.json"));
  EXPECT_NEAR(j["delta_f_over_f0"].get<double>(), c.delta_f(), 1e-12);
  EXPECT_EQ(j["samples"][4]["error"], "relaxation failed");
  EXPECT_TRUE(j.contains("P_eff_over_P"));
  const auto header = read_file(d.path() / "gbh_curve.csv").substr(0, 70);
  EXPECT_EQ(header.rfind("f_over_f0,K_nK,U_nK,P_nK,Pprime_nK,Ueff_nK,Peff_nK,in_central_interval", 0), 0u);
}

TEST(TableParams, ParsingAndCosModel) {
  const auto t = table_params_from_json(nlohmann::json{{"name", "x"}, {"N", 4500}, {"U_nK", 0.006821}, {"P_nK", -0.00514},
                                                       {"Ueff_over_U", 0.8964}, {"Peff_over_P", 0.002749}, {"I0_per_N", 0.02524}});
  const auto pc = parameter_curves(t);
  const double K0 = 2 * constants().hbar_over_kB * 0.02524;
  EXPECT_NEAR(pc.K(0.0), K0, 1e-15);
  EXPECT_NEAR(pc.K(0.5), 0.0, 1e-15);
  EXPECT_NEAR(pc.dK(0.5), -std::numbers::pi * K0, 1e-15);
  EXPECT_NEAR(pc.P_eff(0.3), -0.00514 * 0.002749, 1e-18);
  EXPECT_THROW(table_params_from_json(nlohmann::json{{"N", 10}}), ScenarioError);
}

TEST(CriticalCurves, FilesHaveDocumentedColumns) {
  TempDir d;
  const auto cd = curve_data(synthetic_curve(), 3000);
  write_critical_curves(d.path(), cd, uniform_grid(0.0, 1.0, 21));
  const auto cc = read_file(d.path() / "critical_curves.csv");
  EXPECT_EQ(cc.substr(0, cc.find('\n')), "f_over_f0,Zc_0,Zc_pi,Ic_0_perN,Ic_pi_perN,Ic_sagnac_perN,Ic_sagnac_alpha0_perN");
  EXPECT_EQ(std::count(cc.begin(), cc.end(), '\n'), 22);
  const auto it = read_file(d.path() / "interference.csv");
  EXPECT_EQ(it.substr(0, it.find('\n')), "f_over_f0,Il_perN,minus_Ir_perN");
}

TEST(QubitStage, WritesOutputs) {
  TempDir d;
  const auto t = table_params_from_json(nlohmann::json{{"N", 4500}, {"U_nK", 0.006821}, {"P_nK", -0.00514},
                                                       {"Ueff_over_U", 0.8964}, {"Peff_over_P", 0.002749}, {"I0_per_N", 0.02524}});
  const auto out = run_qubit_stage(d.path(), parameter_curves(t), uniform_grid(0.45, 0.55, 11), {{"source", "test"}});
  const auto rep = nlohmann::json::parse(read_file(d.path() / "qubit_report.json"));
  EXPECT_NEAR(rep["Q"].get<double>(), out.report.Q, 1e-12 * out.report.Q);
  EXPECT_EQ(rep["provenance"]["source"], "test");
  const auto sp = read_file(d.path() / "spectrum.csv");
  EXPECT_EQ(sp.substr(0, sp.find('\n')), "f_over_f0,E0_nK,E1_nK,E2_nK,E3_nK,E4_nK,E5_nK,E6_nK,E7_nK");
  const auto lc = read_file(d.path() / "levels_currents.csv");
  EXPECT_EQ(lc.substr(0, lc.find('\n')), "f_over_f0,I0_perN,I1_perN,I2_perN,I3_perN,I4_perN");
  EXPECT_EQ(std::count(lc.begin(), lc.end(), '\n'), 12);
}

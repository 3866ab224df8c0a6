#pragma once

// Artifact plumbing: CSV/JSON writers, state snapshots, SHA-256 digests and the run manifest.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "aquid/gp2d.hpp"

namespace aquid {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string to_hex(const unsigned char* p, std::size_t n) {
  std::ostringstream os;
  for (std::size_t i = 0; i < n; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(p[i]);
  return os.str();
}

inline std::string sha256_bytes(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw IoError("sha256 failed");
  return to_hex(md, len);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string sha256_file(const std::filesystem::path& p) { return sha256_bytes(read_file(p)); }

inline std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Numbers are written with 12 significant digits; NaN/absent values become empty cells.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& p, const std::vector<std::string>& header) : out_(p) {
    if (!out_) throw IoError("cannot write " + p.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
    cols_ = header.size();
  }

  void row(const std::vector<double>& v) {
    if (v.size() != cols_) throw IoError("csv: column count mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out_ << ',';
      if (std::isfinite(v[i])) out_ << fmt(v[i]);
    }
    out_ << '\n';
  }

  static std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
  }

 private:
  std::ofstream out_;
  std::size_t cols_ = 0;
};

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

// ---- snapshots ------------------------------------------------------------------------------

/// Binary layout (little-endian host order): magic "AQSNAP01", int32 n (stored points per axis),
/// float64 L, float64 omega, int64 unix timestamp, then n*n complex128 amplitudes, row-major in y.
inline void write_snapshot(const std::filesystem::path& p, const OrderParameter& op, std::int64_t timestamp) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  const char magic[8] = {'A', 'Q', 'S', 'N', 'A', 'P', '0', '1'};
  const std::int32_t n = op.grid.n;
  out.write(magic, 8);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&op.grid.L), sizeof op.grid.L);
  out.write(reinterpret_cast<const char*>(&op.omega), sizeof op.omega);
  out.write(reinterpret_cast<const char*>(&timestamp), sizeof timestamp);
  out.write(reinterpret_cast<const char*>(op.psi.data()), static_cast<std::streamsize>(op.psi.size() * sizeof(cplx)));
}

struct Snapshot {
  int n = 0;
  double L = 0.0;
  double omega = 0.0;
  std::int64_t timestamp = 0;
  Field psi;
};

inline Snapshot read_snapshot(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "AQSNAP01") throw IoError("not a snapshot file: " + p.string());
  Snapshot s;
  std::int32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&s.L), sizeof s.L);
  in.read(reinterpret_cast<char*>(&s.omega), sizeof s.omega);
  in.read(reinterpret_cast<char*>(&s.timestamp), sizeof s.timestamp);
  if (!in || n <= 0) throw IoError("truncated snapshot header: " + p.string());
  s.n = n;
  s.psi.resize(static_cast<std::size_t>(n) * n);
  in.read(reinterpret_cast<char*>(s.psi.data()), static_cast<std::streamsize>(s.psi.size() * sizeof(cplx)));
  if (!in) throw IoError("truncated snapshot data: " + p.string());
  return s;
}

inline nlohmann::json sidecar(const StationaryState& s) {
  return {{"mu_nK", s.mu},
          {"energy_per_particle_nK", s.energy_per_particle},
          {"winding", s.winding},
          {"phase_label", to_string(s.phase_label)},
          {"phase_rad", s.phase},
          {"residual_nK", s.residual},
          {"omega_rad_per_s", s.psi.omega},
          {"grid_points_stored", s.psi.grid.n},
          {"box_half_length_um", s.psi.grid.L}};
}

inline void write_time_series(const std::filesystem::path& p, const std::vector<EvolveSample>& series) {
  CsvWriter w(p, {"t_s", "Z", "phi_rad", "energy_nK", "current_per_particle"});
  for (const auto& s : series) w.row({s.t, s.z, s.phi, s.energy, s.current});
}

// ---- manifest -------------------------------------------------------------------------------

enum class StageStatus { ok, partial, failed, skipped };

inline const char* to_string(StageStatus s) {
  switch (s) {
    case StageStatus::ok: return "ok";
    case StageStatus::partial: return "partial";
    case StageStatus::failed: return "failed";
    default: return "skipped";
  }
}

struct StageRecord {
  std::string name;
  StageStatus status = StageStatus::ok;
  double wall_seconds = 0.0;
  std::string message;
};

/// Output registry; every emitted file is recorded with its SHA-256 digest.
class RunManifest {
 public:
  RunManifest(std::filesystem::path dir, std::string scenario_hash, std::string version)
      : dir_(std::move(dir)), scenario_hash_(std::move(scenario_hash)), version_(std::move(version)) {}

  /// Digest of a file already written under the output directory.
  std::string add_file(const std::filesystem::path& p) {
    std::lock_guard lock(mu_);
    const std::string d = sha256_file(p);
    files_[std::filesystem::relative(p, dir_).generic_string()] = d;
    return d;
  }

  void add_stage(StageRecord r) {
    std::lock_guard lock(mu_);
    stages_.push_back(std::move(r));
  }

  [[nodiscard]] const std::map<std::string, std::string>& files() const { return files_; }
  [[nodiscard]] const std::vector<StageRecord>& stages() const { return stages_; }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json st = nlohmann::json::array();
    for (const auto& s : stages_)
      st.push_back({{"name", s.name}, {"status", to_string(s.status)}, {"wall_seconds", s.wall_seconds}, {"message", s.message}});
    return {{"tool_version", version_}, {"scenario_sha256", scenario_hash_}, {"stages", st}, {"files", files_}};
  }

  void write() const { write_json(dir_ / "manifest.json", to_json()); }

 private:
  std::filesystem::path dir_;
  std::string scenario_hash_;
  std::string version_;
  std::map<std::string, std::string> files_;
  std::vector<StageRecord> stages_;
  mutable std::mutex mu_;
};

class StageTimer {
 public:
  StageTimer() : t0_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace aquid

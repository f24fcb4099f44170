#pragma once

// Trajectory serialization (CSV and a compact binary), coefficient-table
// export, and deterministic JSON writing.

#include "opm/core.hpp"
#include "opm/param.hpp"
#include "opm/reduce.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace opm {

using Json = nlohmann::ordered_json;

namespace io {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory " + dir.string());
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

// --- CSV ---------------------------------------------------------------------

/// Physical trajectories: t,c1,..,cN. Eigen trajectories: t,re1,im1,...
inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const Trajectory& traj) {
  std::ostringstream out;
  out.precision(17);
  const int n =
      traj.states.empty() ? 0 : static_cast<int>(traj.states[0].size());
  const bool complex_cols = traj.coords == Trajectory::Coords::Eigen;
  out << "t";
  for (int j = 0; j < n; ++j) {
    if (complex_cols)
      out << ",re" << (j + 1) << ",im" << (j + 1);
    else
      out << ",c" << (j + 1);
  }
  out << "\n";
  for (size_t k = 0; k < traj.size(); ++k) {
    out << traj.time(k);
    for (int j = 0; j < n; ++j) {
      out << "," << traj.states[k][j].real();
      if (complex_cols) out << "," << traj.states[k][j].imag();
    }
    out << "\n";
  }
  write_text(path, out.str());
}

// --- Binary ------------------------------------------------------------------
// Little-endian layout:
//   char[8] magic "OPMTRJ01",
//   u64 dims (doubles per row), u64 n_samples,
//   u64 flags (bit0: complex rows, re/im interleaved; bit1: increment record
//   appended), f64 dt, f64 t0,
//   n_samples rows of dims doubles (row-major),
//   n_samples - 1 increment doubles when bit1 is set.

inline constexpr char kTrajMagic[8] = {'O', 'P', 'M', 'T', 'R', 'J', '0', '1'};

inline void write_trajectory_binary(const std::filesystem::path& path,
                                    const Trajectory& traj) {
  static_assert(std::endian::native == std::endian::little,
                "binary trajectory format is little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path.string());
  const bool complex_rows = traj.coords == Trajectory::Coords::Eigen;
  const std::uint64_t n_state =
      traj.states.empty() ? 0 : static_cast<std::uint64_t>(traj.states[0].size());
  const std::uint64_t dims = complex_rows ? 2 * n_state : n_state;
  const std::uint64_t n_samples = traj.states.size();
  const bool with_increments = !traj.noise_increments.empty();
  const std::uint64_t flags = (complex_rows ? 1u : 0u) |
                              (with_increments ? 2u : 0u);
  out.write(kTrajMagic, 8);
  auto put_u64 = [&](std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  auto put_f64 = [&](double v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  put_u64(dims);
  put_u64(n_samples);
  put_u64(flags);
  put_f64(traj.dt);
  put_f64(traj.t0);
  std::vector<double> row(dims);
  for (const auto& s : traj.states) {
    size_t c = 0;
    for (int j = 0; j < s.size(); ++j) {
      row[c++] = s[j].real();
      if (complex_rows) row[c++] = s[j].imag();
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(8 * dims));
  }
  if (with_increments)
    out.write(reinterpret_cast<const char*>(traj.noise_increments.data()),
              static_cast<std::streamsize>(8 * traj.noise_increments.size()));
}

inline Trajectory read_trajectory_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kTrajMagic, 8) != 0)
    throw ConfigError("bad trajectory magic in " + path.string());
  auto get_u64 = [&] {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto get_f64 = [&] {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  const std::uint64_t dims = get_u64();
  const std::uint64_t n_samples = get_u64();
  const std::uint64_t flags = get_u64();
  Trajectory traj;
  traj.dt = get_f64();
  traj.t0 = get_f64();
  const bool complex_rows = flags & 1u;
  traj.coords = complex_rows ? Trajectory::Coords::Eigen
                             : Trajectory::Coords::Physical;
  const std::uint64_t n_state = complex_rows ? dims / 2 : dims;
  std::vector<double> row(dims);
  traj.states.reserve(n_samples);
  for (std::uint64_t k = 0; k < n_samples; ++k) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(8 * dims));
    if (!in) throw ConfigError("truncated trajectory " + path.string());
    CVec s(static_cast<int>(n_state));
    for (std::uint64_t j = 0; j < n_state; ++j)
      s[static_cast<int>(j)] =
          complex_rows ? Complex(row[2 * j], row[2 * j + 1])
                       : Complex(row[j], 0.0);
    traj.states.push_back(std::move(s));
  }
  if (flags & 2u) {
    traj.noise_increments.resize(n_samples ? n_samples - 1 : 0);
    in.read(reinterpret_cast<char*>(traj.noise_increments.data()),
            static_cast<std::streamsize>(8 * traj.noise_increments.size()));
    if (!in) throw ConfigError("truncated increment record " + path.string());
  }
  return traj;
}

// --- Coefficient tables ------------------------------------------------------

/// Per-mode parameterization tables with the spectral-gap values
/// delta^n_ij = lambda_i + lambda_j - lambda_n alongside each quadratic entry.
inline Json param_tables_json(const Parameterization& p, const EigenModel& em) {
  Json root;
  root["kind"] = to_string(p.kind);
  root["m_c"] = p.m_c;
  root["n_total"] = p.n_total;
  Json modes = Json::array();
  for (const auto& mp : p.modes) {
    Json jm;
    jm["mode"] = mp.mode + 1;
    jm["tau"] = std::isinf(mp.tau) ? Json("inf") : Json(mp.tau);
    jm["lambda"] = {mp.lambda.real(), mp.lambda.imag()};
    jm["constant"] = {mp.constant.real(), mp.constant.imag()};
    Json lin = Json::array();
    for (int i = 0; i < mp.linear.size(); ++i)
      lin.push_back({{"i", i + 1},
                     {"value", {mp.linear[i].real(), mp.linear[i].imag()}}});
    jm["linear"] = lin;
    Json quad = Json::array();
    for (int i = 0; i < mp.quadratic.rows(); ++i)
      for (int j = 0; j < mp.quadratic.cols(); ++j) {
        const Complex d =
            em.basis.lambdas[i] + em.basis.lambdas[j] - em.basis.lambdas[mp.mode];
        quad.push_back({{"i", i + 1},
                        {"j", j + 1},
                        {"value",
                         {mp.quadratic(i, j).real(), mp.quadratic(i, j).imag()}},
                        {"delta", {d.real(), d.imag()}}});
      }
    jm["quadratic"] = quad;
    modes.push_back(jm);
  }
  root["modes"] = modes;
  return root;
}

/// tau/defect profile rows, one file per scan: mode,tau,Q.
inline void write_defect_profiles_csv(
    const std::filesystem::path& path,
    const std::vector<std::pair<int, std::pair<std::vector<double>,
                                               std::vector<double>>>>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "mode,tau,Q\n";
  for (const auto& [mode, grid] : rows)
    for (size_t i = 0; i < grid.first.size(); ++i)
      out << mode << "," << grid.first[i] << "," << grid.second[i] << "\n";
  write_text(path, out.str());
}

}  // namespace io
}  // namespace opm

/*
 * Copyright 2026 The swarmgp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarmgp/common.hpp"
#include "swarmgp/dynamics.hpp"
#include "swarmgp/gp.hpp"
#include "swarmgp/measures.hpp"

namespace swarmgp {

// Plain-text artifact writers. Every file is byte-deterministic for a fixed
// config and seed: doubles render with %.17g (round-trip exact), nothing
// records wall-clock time, and row order follows the data layout.

/// Shortest decimal that round-trips the double.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

/// FNV-1a 64-bit content hash, rendered as 16 hex digits.
inline std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);  // binary: no newline translation
  if (!out)
    throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

/// One row per (trajectory, observation, agent) with states and observed
/// velocities. Columns: m,l,t,agent,type,x0..x{d-1},v0..v{d-1}.
inline void save_dataset_csv(const std::filesystem::path& path,
                             const TrajectoryDataset& ds) {
  std::ofstream out = open_out(path);
  const int d = ds.species.dim;
  out << "m,l,t,agent,type";
  for (int c = 0; c < d; ++c) out << ",x" << c;
  for (int c = 0; c < d; ++c) out << ",v" << c;
  out << "\n";
  for (int m = 0; m < ds.num_trajectories(); ++m) {
    const Trajectory& traj = ds.trajectories[static_cast<std::size_t>(m)];
    for (int l = 0; l < traj.num_obs(); ++l)
      for (int i = 0; i < ds.species.n(); ++i) {
        out << m << ',' << l << ',' << fmt_double(traj.times[static_cast<std::size_t>(l)])
            << ',' << i << ',' << ds.species.type_of(i);
        for (int c = 0; c < d; ++c)
          out << ',' << fmt_double(traj.x[static_cast<std::size_t>(l)](c, i));
        for (int c = 0; c < d; ++c)
          out << ',' << fmt_double(traj.v[static_cast<std::size_t>(l)](c, i));
        out << "\n";
      }
  }
}

/// Loads a dataset written by save_dataset_csv. Round-trip partner used by
/// tests and by downstream tooling.
inline TrajectoryDataset load_dataset_csv(const std::filesystem::path& path,
                                          const SpeciesConfig& sc,
                                          double horizon, double sigma) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty dataset file: " + path.string());

  TrajectoryDataset ds;
  ds.species = sc;
  ds.horizon = horizon;
  ds.sigma = sigma;
  const int d = sc.dim;
  const int n = sc.n();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> cells;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = line.find(',', start);
      const std::string cell =
          line.substr(start, comma == std::string::npos ? std::string::npos
                                                        : comma - start);
      cells.push_back(std::stod(cell));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != static_cast<std::size_t>(5 + 2 * d))
      throw std::runtime_error("malformed dataset row in " + path.string());
    const int m = static_cast<int>(cells[0]);
    const int l = static_cast<int>(cells[1]);
    const int agent = static_cast<int>(cells[3]);
    if (m < 0 || l < 0 || agent < 0 || agent >= n)
      throw std::runtime_error("out-of-range dataset row in " + path.string());
    while (ds.num_trajectories() <= m) ds.trajectories.emplace_back();
    Trajectory& traj = ds.trajectories[static_cast<std::size_t>(m)];
    while (traj.num_obs() <= l) {
      traj.times.push_back(0.0);
      traj.x.emplace_back(Mat::Zero(d, n));
      traj.v.emplace_back(Mat::Zero(d, n));
    }
    traj.times[static_cast<std::size_t>(l)] = cells[2];
    for (int c = 0; c < d; ++c) {
      traj.x[static_cast<std::size_t>(l)](c, agent) = cells[static_cast<std::size_t>(5 + c)];
      traj.v[static_cast<std::size_t>(l)](c, agent) = cells[static_cast<std::size_t>(5 + d + c)];
    }
  }
  return ds;
}

/// Estimated kernel on a grid next to the truth, with the posterior standard
/// deviation when available. Columns: r,truth,mean,std.
inline void save_curve_csv(const std::filesystem::path& path,
                           const std::vector<double>& grid, const Vec& truth,
                           const Vec& mean, const Vec& stddev) {
  const Eigen::Index g = static_cast<Eigen::Index>(grid.size());
  if (truth.size() != g || mean.size() != g ||
      (stddev.size() != 0 && stddev.size() != g))
    throw std::invalid_argument("save_curve_csv: column length mismatch");
  std::ofstream out = open_out(path);
  out << "r,truth,mean,std\n";
  for (Eigen::Index j = 0; j < g; ++j) {
    out << fmt_double(grid[static_cast<std::size_t>(j)]) << ','
        << fmt_double(truth[j]) << ',' << fmt_double(mean[j]) << ','
        << fmt_double(stddev.size() ? stddev[j] : 0.0) << "\n";
  }
}

struct KernelErrorRow {
  int trial = 0;
  int p = 1;
  int q = 1;
  KernelError error;
};

inline void save_kernel_errors_csv(const std::filesystem::path& path,
                                   const std::vector<KernelErrorRow>& rows) {
  std::ofstream out = open_out(path);
  out << "trial,component,linf,l2rho,absolute\n";
  for (const KernelErrorRow& r : rows)
    out << r.trial << ',' << r.p << r.q << ',' << fmt_double(r.error.linf)
        << ',' << fmt_double(r.error.l2rho) << ',' << (r.error.absolute ? 1 : 0)
        << "\n";
}

struct TrajErrorRow {
  int trial = 0;
  std::string split;     ///< "train" or "test"
  std::string interval;  ///< "first" ([0,T]) or "second" ([T,2T])
  double error = 0.0;
};

inline void save_traj_errors_csv(const std::filesystem::path& path,
                                 const std::vector<TrajErrorRow>& rows) {
  std::ofstream out = open_out(path);
  out << "trial,split,interval,error\n";
  for (const TrajErrorRow& r : rows)
    out << r.trial << ',' << r.split << ',' << r.interval << ','
        << fmt_double(r.error) << "\n";
}

/// Atom expansion of each kernel estimate. Columns: component,atom,r,coeff.
inline void save_coefficients_csv(const std::filesystem::path& path,
                                  const std::array<AtomExpansion, 4>& exps) {
  std::ofstream out = open_out(path);
  out << "component,atom,r,coeff\n";
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) {
      const AtomExpansion& e = exps[static_cast<std::size_t>(2 * (p - 1) + (q - 1))];
      for (std::size_t a = 0; a < e.r.size(); ++a)
        out << p << q << ',' << a << ',' << fmt_double(e.r[a]) << ','
            << fmt_double(e.coeff[static_cast<Eigen::Index>(a)]) << "\n";
    }
}

inline void save_hyperparams_txt(const std::filesystem::path& path,
                                 const GpHyperparams& h, double nlml_value,
                                 int iterations) {
  std::ofstream out = open_out(path);
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q)
      out << "theta" << p << q << ".s2 " << fmt_double(h.theta(p, q).s2)
          << "\ntheta" << p << q << ".omega "
          << fmt_double(h.theta(p, q).omega) << "\n";
  out << "sigma2 " << fmt_double(h.sigma2) << "\n";
  out << "nlml " << fmt_double(nlml_value) << "\n";
  out << "iterations " << iterations << "\n";
}

/// Run manifest: command, seed, hash of the canonical config text, and the
/// sorted list of artifacts. Deliberately free of timestamps and host state
/// so reruns are byte-identical.
inline void save_manifest(const std::filesystem::path& path,
                          const std::string& command, std::uint64_t seed,
                          const std::string& canonical_config,
                          std::vector<std::string> outputs) {
  std::sort(outputs.begin(), outputs.end());
  std::ofstream out = open_out(path);
  out << "{\n";
  out << "  \"command\": \"" << command << "\",\n";
  out << "  \"config_hash\": \"" << fnv1a64_hex(canonical_config) << "\",\n";
  out << "  \"seed\": " << seed << ",\n";
  out << "  \"outputs\": [";
  for (std::size_t i = 0; i < outputs.size(); ++i)
    out << (i ? ", " : "") << '"' << outputs[i] << '"';
  out << "]\n}\n";
}

}  // namespace swarmgp

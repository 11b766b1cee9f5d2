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
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "swarmgp/common.hpp"
#include "swarmgp/dynamics.hpp"
#include "swarmgp/kernels.hpp"

namespace swarmgp {

// Pairwise-distance law of an ensemble and the error metrics evaluated
// against it. An interaction kernel can only be learned where pair distances
// actually occur, so both kernel error norms are tied to the empirical
// distance distribution of a reference ensemble.

/// Maximal pairwise distance over every recorded observation. Pairs of every
/// component contribute, giving one shared domain [0, R] for all four
/// kernels.
inline double max_pair_distance(const TrajectoryDataset& ds) {
  const int n = ds.species.n();
  double radius = 0.0;
  for (const Trajectory& traj : ds.trajectories)
    for (const Mat& x : traj.x)
      for (int i = 0; i < n; ++i)
        for (int k = i + 1; k < n; ++k)
          radius = std::max(radius, (x.col(i) - x.col(k)).norm());
  return radius;
}

/// Distance distribution of one kernel component, binned onto a uniform
/// grid over [0, R]. rho carries probability mass 1/(M L Z) per ordered
/// pair (i, k), i != k, with Z = Np(Np-1) within a species and Np Nq
/// across; tilde carries the exact r^2-weighted mass of the same atoms.
struct EmpiricalMeasure {
  std::vector<double> grid;
  Vec rho;    ///< probability weights, sums to 1
  Vec tilde;  ///< r^2 d rho, unnormalized
};

inline EmpiricalMeasure empirical_measure(const TrajectoryDataset& ds, int p,
                                          int q, double radius,
                                          int grid_points = 1000) {
  if (p < 1 || p > 2 || q < 1 || q > 2)
    throw std::invalid_argument("empirical_measure: species indices must be 1 or 2");
  if (!(radius > 0.0))
    throw std::invalid_argument("empirical_measure: radius must be > 0");
  if (grid_points < 2)
    throw std::invalid_argument("empirical_measure: need at least 2 grid points");
  const SpeciesConfig& sc = ds.species;
  const int np = p == 1 ? sc.n1 : sc.n2;
  const int nq = q == 1 ? sc.n1 : sc.n2;
  const double z_norm = p == q ? static_cast<double>(np) * (np - 1)
                               : static_cast<double>(np) * nq;
  if (!(z_norm > 0.0))
    throw std::invalid_argument("empirical_measure: component has no pairs");

  long total_obs = 0;
  for (const Trajectory& traj : ds.trajectories) total_obs += traj.num_obs();
  if (total_obs == 0)
    throw std::invalid_argument("empirical_measure: dataset has no observations");

  EmpiricalMeasure m;
  m.grid = uniform_grid(radius, grid_points);
  m.rho = Vec::Zero(grid_points);
  m.tilde = Vec::Zero(grid_points);
  const double w = 1.0 / (static_cast<double>(total_obs) * z_norm);
  const double inv_h = (grid_points - 1) / radius;

  const int p_begin = p == 1 ? 0 : sc.n1;
  const int p_end = p == 1 ? sc.n1 : sc.n();
  const int q_begin = q == 1 ? 0 : sc.n1;
  const int q_end = q == 1 ? sc.n1 : sc.n();
  for (const Trajectory& traj : ds.trajectories)
    for (const Mat& x : traj.x)
      for (int i = p_begin; i < p_end; ++i)
        for (int k = q_begin; k < q_end; ++k) {
          if (k == i) continue;
          const double r = (x.col(i) - x.col(k)).norm();
          const long bin = std::lround(r * inv_h);
          const long clamped =
              std::min<long>(std::max<long>(bin, 0), grid_points - 1);
          m.rho[clamped] += w;
          m.tilde[clamped] += w * r * r;
        }
  return m;
}

/// Kernel reconstruction errors against a reference measure: the sup norm
/// over the grid and the L2 norm weighted by the r^2-tilted distance law,
/// both relative to the truth. A truth that vanishes on the whole grid has
/// no scale, so absolute errors are reported instead and flagged.
struct KernelError {
  double linf = 0.0;
  double l2rho = 0.0;
  bool absolute = false;
};

inline KernelError kernel_error(const RadialKernel& truth,
                                const Vec& estimate_on_grid,
                                const EmpiricalMeasure& measure) {
  const Eigen::Index g = static_cast<Eigen::Index>(measure.grid.size());
  if (estimate_on_grid.size() != g)
    throw std::invalid_argument("kernel_error: estimate grid size mismatch");
  Vec truth_vals(g);
  for (Eigen::Index j = 0; j < g; ++j) truth_vals[j] = truth.f(measure.grid[j]);

  const Vec diff = estimate_on_grid - truth_vals;
  const double linf_abs = diff.cwiseAbs().maxCoeff();
  const double linf_scale = truth_vals.cwiseAbs().maxCoeff();
  const double l2_abs = std::sqrt(diff.cwiseAbs2().dot(measure.tilde));
  const double l2_scale = std::sqrt(truth_vals.cwiseAbs2().dot(measure.tilde));

  KernelError e;
  e.absolute = linf_scale < 1e-14;
  if (e.absolute) {
    e.linf = linf_abs;
    e.l2rho = l2_abs;
  } else {
    e.linf = linf_abs / linf_scale;
    // A truth that is nonzero on the grid but unsupported by the measure
    // still reports an absolute L2 error rather than dividing by zero.
    e.l2rho = l2_scale > 0.0 ? l2_abs / l2_scale : l2_abs;
  }
  return e;
}

/// Relative state deviation sup over the observation range [begin, end):
/// max_t |pred(t) - truth(t)| / |truth(t)| in the Frobenius norm.
inline double trajectory_error(const Trajectory& truth, const Trajectory& pred,
                               int begin, int end) {
  if (begin < 0 || end > truth.num_obs() || end > pred.num_obs() ||
      begin >= end)
    throw std::invalid_argument("trajectory_error: bad observation range");
  double worst = 0.0;
  for (int l = begin; l < end; ++l) {
    const double scale = truth.x[static_cast<std::size_t>(l)].norm();
    const double dev =
        (pred.x[static_cast<std::size_t>(l)] - truth.x[static_cast<std::size_t>(l)])
            .norm();
    if (!(scale > 0.0))
      throw std::runtime_error("trajectory_error: reference state vanishes");
    worst = std::max(worst, dev / scale);
  }
  return worst;
}

/// Least-squares fit of y = prefactor * x^exponent on log-log axes.
struct PowerLawFit {
  double exponent = 0.0;
  double prefactor = 0.0;
};

inline PowerLawFit fit_power_law(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_power_law: need >= 2 matching samples");
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  Vec lx(n), ly(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x[static_cast<std::size_t>(i)] > 0.0) ||
        !(y[static_cast<std::size_t>(i)] > 0.0))
      throw std::invalid_argument("fit_power_law: samples must be positive");
    lx[i] = std::log(x[static_cast<std::size_t>(i)]);
    ly[i] = std::log(y[static_cast<std::size_t>(i)]);
  }
  const double mx = lx.mean();
  const double my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  if (!(sxx > 0.0))
    throw std::invalid_argument("fit_power_law: x samples must be distinct");
  const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
  PowerLawFit fit;
  fit.exponent = sxy / sxx;
  fit.prefactor = std::exp(my - fit.exponent * mx);
  return fit;
}

}  // namespace swarmgp

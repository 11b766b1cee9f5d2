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

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "swarmgp/common.hpp"
#include "swarmgp/kernels.hpp"

namespace swarmgp {

// One observed trajectory: states and velocities at the recorded times.
// Columns index agents, rows index spatial coordinates.
struct Trajectory {
  std::vector<double> times;
  std::vector<Mat> x;
  std::vector<Mat> v;

  int num_obs() const { return static_cast<int>(times.size()); }
};

struct TrajectoryDataset {
  SpeciesConfig species;
  double horizon = 0.0;
  double sigma = 0.0;
  std::vector<Trajectory> trajectories;

  int num_trajectories() const { return static_cast<int>(trajectories.size()); }
};

// Right-hand side of the first-order model: agent i moves with the
// population-averaged sum of pairwise influences,
//   dx_i/dt = (1/N) sum_{i' != i} phi^{type(i) type(i')}(|x_i - x_i'|) (x_i - x_i').
// Positive phi pushes agents apart, negative phi pulls them together; the
// truth kernel sets are built for this orientation (short-range repulsion
// with long-range attraction gives bounded swarms).
// Throws if any pairwise term is non-finite (singular kernel hit head-on).
inline Mat force_field(const SpeciesConfig& sc, const KernelSet& kernels,
                       const Mat& x) {
  if (x.rows() != sc.dim || x.cols() != sc.n())
    throw std::invalid_argument("force_field: state shape mismatch");
  const int n = sc.n();
  Mat out = Mat::Zero(sc.dim, n);
  for (int i = 0; i < n; ++i) {
    const int ti = sc.type_of(i);
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      const Vec diff = x.col(i) - x.col(k);
      const double r = diff.norm();
      const double w = kernels.get(ti, sc.type_of(k))(r);
      out.col(i) += w * diff;
    }
  }
  out /= static_cast<double>(n);
  if (!out.allFinite()) {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        if (k == i) continue;
        const Vec diff = x.col(i) - x.col(k);
        const double r = diff.norm();
        const double w = kernels.get(sc.type_of(i), sc.type_of(k))(r);
        if (!std::isfinite(w) || !(w * diff).allFinite()) {
          std::ostringstream os;
          os << "force_field: non-finite influence between agents " << i
             << " and " << k << " at distance " << r;
          throw std::runtime_error(os.str());
        }
      }
    }
    throw std::runtime_error("force_field: non-finite result");
  }
  return out;
}

// Equidistant observation times covering [0, horizon] inclusive.
inline std::vector<double> observation_times(double horizon, int count) {
  if (count < 1 || horizon < 0.0)
    throw std::invalid_argument("observation_times: need count >= 1, horizon >= 0");
  std::vector<double> t(count);
  if (count == 1) {
    t[0] = 0.0;
    return t;
  }
  for (int l = 0; l < count; ++l)
    t[l] = horizon * static_cast<double>(l) / static_cast<double>(count - 1);
  return t;
}

// Classical fourth-order Runge-Kutta from t = 0 through the given sorted
// observation times, recording state and exact velocity at each of them.
// Every gap between consecutive recorded times must be a whole number of
// steps of size dt.
inline Trajectory integrate(const SpeciesConfig& sc, const KernelSet& kernels,
                            Mat x, const std::vector<double>& obs_times,
                            double dt) {
  if (dt <= 0.0) throw std::invalid_argument("integrate: dt must be positive");
  for (std::size_t i = 1; i < obs_times.size(); ++i)
    if (obs_times[i] <= obs_times[i - 1])
      throw std::invalid_argument("integrate: observation times must increase");
  if (!obs_times.empty() && obs_times.front() < 0.0)
    throw std::invalid_argument("integrate: observation times must be >= 0");

  Trajectory traj;
  traj.times = obs_times;
  traj.x.reserve(obs_times.size());
  traj.v.reserve(obs_times.size());

  double t = 0.0;
  for (double target : obs_times) {
    const double gap = target - t;
    const auto steps = static_cast<std::int64_t>(std::llround(gap / dt));
    if (std::abs(static_cast<double>(steps) * dt - gap) >
        1e-9 * std::max(1.0, std::abs(gap)))
      throw std::invalid_argument(
          "integrate: dt must evenly divide the observation spacing");
    for (std::int64_t s = 0; s < steps; ++s) {
      const Mat k1 = force_field(sc, kernels, x);
      const Mat k2 = force_field(sc, kernels, x + 0.5 * dt * k1);
      const Mat k3 = force_field(sc, kernels, x + 0.5 * dt * k2);
      const Mat k4 = force_field(sc, kernels, x + dt * k3);
      x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    t = target;
    traj.x.push_back(x);
    traj.v.push_back(force_field(sc, kernels, x));
  }
  return traj;
}

// Initial positions drawn coordinate-wise from Unif[lo, hi].
inline Mat sample_initial(const SpeciesConfig& sc, Rng& rng, double lo = -1.0,
                          double hi = 1.0) {
  Mat x(sc.dim, sc.n());
  for (int i = 0; i < sc.n(); ++i)
    for (int d = 0; d < sc.dim; ++d) x(d, i) = rng.uniform(lo, hi);
  return x;
}

namespace detail {
inline constexpr std::uint64_t kStreamInitial = 0x1c1;
inline constexpr std::uint64_t kStreamNoise = 0x2e5;
}  // namespace detail

// Simulates M trajectories from independent uniform initial conditions and
// observes velocities under additive isotropic Gaussian noise of standard
// deviation sigma. States are recorded noise-free. Each trajectory draws
// from its own seed substreams, so growing M extends a dataset without
// perturbing earlier trajectories.
inline TrajectoryDataset generate_dataset(const SpeciesConfig& sc,
                                          const KernelSet& kernels, int num_traj,
                                          int num_obs, double horizon,
                                          double sigma, std::uint64_t seed,
                                          int dt_substeps = 10) {
  if (num_traj < 1) throw std::invalid_argument("generate_dataset: need M >= 1");
  if (sigma < 0.0) throw std::invalid_argument("generate_dataset: sigma < 0");
  if (dt_substeps < 1)
    throw std::invalid_argument("generate_dataset: dt_substeps < 1");
  const std::vector<double> times = observation_times(horizon, num_obs);
  const double spacing =
      num_obs > 1 ? times[1] - times[0] : std::max(horizon, 1.0);
  const double dt = spacing / dt_substeps;

  TrajectoryDataset ds;
  ds.species = sc;
  ds.horizon = horizon;
  ds.sigma = sigma;
  ds.trajectories.reserve(num_traj);
  for (int m = 0; m < num_traj; ++m) {
    Rng ic_rng(stream_seed(seed, detail::kStreamInitial, m));
    Mat x0 = sample_initial(sc, ic_rng);
    Trajectory traj = integrate(sc, kernels, x0, times, dt);
    if (sigma > 0.0) {
      Rng noise_rng(stream_seed(seed, detail::kStreamNoise, m));
      for (Mat& v : traj.v)
        for (int i = 0; i < v.cols(); ++i)
          for (int d = 0; d < v.rows(); ++d) v(d, i) += sigma * noise_rng.normal();
    }
    ds.trajectories.push_back(std::move(traj));
  }
  return ds;
}

// Evolves an initial state under a (typically learned) kernel set and records
// the state at the requested times. Thin wrapper that exists so callers can
// run estimated systems through the exact same integrator as the truth.
inline Trajectory predict_trajectory(const SpeciesConfig& sc,
                                     const KernelSet& kernels, const Mat& x0,
                                     const std::vector<double>& obs_times,
                                     double dt) {
  return integrate(sc, kernels, x0, obs_times, dt);
}

}  // namespace swarmgp

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

// Gaussian process regression for interaction kernels observed only through
// velocity data. Placing independent GP priors on the four radial kernels
// makes the stacked velocity vector Gaussian with a block covariance built
// from pairwise displacements; everything here assembles that covariance,
// evaluates and optimizes the marginal likelihood, and reads posterior
// kernel curves back out. A matrix-free conjugate-gradient path covers
// datasets too large for dense Cholesky.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "swarmgp/common.hpp"
#include "swarmgp/dynamics.hpp"
#include "swarmgp/kernels.hpp"
#include "swarmgp/lbfgs.hpp"
#include "swarmgp/semiseparable.hpp"

namespace swarmgp {

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

/// One Matérn parameter pair per interaction class plus the observation
/// noise variance. Log-space packing order: (11, 12, 21, 22) x (s2, omega),
/// then sigma2.
struct GpHyperparams {
  MaternParams theta11, theta12, theta21, theta22;
  double sigma2 = 1e-6;

  MaternParams& theta(int p, int q) {
    if (p == 1 && q == 1) return theta11;
    if (p == 1 && q == 2) return theta12;
    if (p == 2 && q == 1) return theta21;
    if (p == 2 && q == 2) return theta22;
    throw std::invalid_argument("GpHyperparams::theta: class indices must be 1 or 2");
  }
  const MaternParams& theta(int p, int q) const {
    return const_cast<GpHyperparams*>(this)->theta(p, q);
  }

  void validate() const {
    theta11.validate();
    theta12.validate();
    theta21.validate();
    theta22.validate();
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
      throw std::invalid_argument("GpHyperparams: sigma2 must be finite and >= 0");
  }
};

inline constexpr int kNumLogParams = 9;

inline Vec hyperparams_to_log(const GpHyperparams& h) {
  Vec x(kNumLogParams);
  int j = 0;
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) {
      x[j++] = std::log(h.theta(p, q).s2);
      x[j++] = std::log(h.theta(p, q).omega);
    }
  x[8] = std::log(std::max(h.sigma2, 1e-300));
  return x;
}

inline GpHyperparams hyperparams_from_log(const Vec& x) {
  if (x.size() != kNumLogParams)
    throw std::invalid_argument("hyperparams_from_log: expected 9 entries");
  GpHyperparams h;
  int j = 0;
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) {
      h.theta(p, q).s2 = std::exp(x[j++]);
      h.theta(p, q).omega = std::exp(x[j++]);
    }
  h.sigma2 = std::exp(x[8]);
  return h;
}

// ---------------------------------------------------------------------------
// Flattened training data with cached pair geometry
// ---------------------------------------------------------------------------

/// Training snapshots stacked observation-major. Row layout of the stacked
/// vectors: row = o * dim * N + i * dim + coordinate, with o = m * L + l.
struct GpTrainData {
  SpeciesConfig species;
  std::vector<Mat> states;  ///< one dim x N matrix per observation
  Vec z;                    ///< stacked observed velocities

  /// Displacements x_i - x_k and distances from agent i to every agent of a
  /// class, excluding i itself. Indexed by [o * N + i][q - 1].
  struct Slice {
    Mat disp;  ///< dim x (class size, minus one if i belongs to it)
    Vec dist;
  };
  std::vector<std::array<Slice, 2>> pairs;
  double max_distance = 0.0;

  int num_obs() const { return static_cast<int>(states.size()); }
  int rows() const { return num_obs() * species.dim * species.n(); }
};

/// Builds the geometry cache for a set of snapshots. The observed-velocity
/// vector z is stacked separately so tests can pair arbitrary states with
/// arbitrary observations.
inline GpTrainData make_train_data(const SpeciesConfig& sc,
                                   std::vector<Mat> states, Vec z) {
  sc.validate();
  GpTrainData d;
  d.species = sc;
  d.states = std::move(states);
  d.z = std::move(z);
  const int n = sc.n();
  const int num_obs = d.num_obs();
  if (d.z.size() != static_cast<Eigen::Index>(num_obs) * sc.dim * n)
    throw std::invalid_argument("make_train_data: z length does not match states");
  d.pairs.resize(static_cast<std::size_t>(num_obs) * n);
  for (int o = 0; o < num_obs; ++o) {
    const Mat& x = d.states[o];
    if (x.rows() != sc.dim || x.cols() != n)
      throw std::invalid_argument("make_train_data: snapshot shape mismatch");
    for (int i = 0; i < n; ++i) {
      for (int q = 1; q <= 2; ++q) {
        const int begin = q == 1 ? 0 : sc.n1;
        const int end = q == 1 ? sc.n1 : n;
        const int count = (end - begin) - (i >= begin && i < end ? 1 : 0);
        GpTrainData::Slice& s = d.pairs[static_cast<std::size_t>(o) * n + i][q - 1];
        s.disp.resize(sc.dim, count);
        s.dist.resize(count);
        int c = 0;
        for (int k = begin; k < end; ++k) {
          if (k == i) continue;
          s.disp.col(c) = x.col(i) - x.col(k);
          s.dist[c] = s.disp.col(c).norm();
          d.max_distance = std::max(d.max_distance, s.dist[c]);
          ++c;
        }
      }
    }
  }
  return d;
}

/// Flattens an observed dataset into regression form.
inline GpTrainData flatten_dataset(const TrajectoryDataset& ds) {
  const SpeciesConfig& sc = ds.species;
  const int n = sc.n();
  std::vector<Mat> states;
  Vec z(static_cast<Eigen::Index>(ds.num_trajectories()) *
        (ds.trajectories.empty() ? 0 : ds.trajectories[0].num_obs()) * sc.dim * n);
  Eigen::Index row = 0;
  for (const Trajectory& traj : ds.trajectories) {
    for (int l = 0; l < traj.num_obs(); ++l) {
      states.push_back(traj.x[l]);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < sc.dim; ++c) z[row++] = traj.v[l](c, i);
    }
  }
  if (row != z.size())
    throw std::invalid_argument("flatten_dataset: ragged trajectory lengths");
  return make_train_data(sc, std::move(states), std::move(z));
}

// ---------------------------------------------------------------------------
// Matérn tiles over distance vectors
// ---------------------------------------------------------------------------

/// Gram tile K[a,b] = matern32(p, ra[a], rb[b]), vectorized.
inline Mat matern_tile(const MaternParams& p, const Vec& ra, const Vec& rb) {
  const Eigen::ArrayXXd h =
      (ra.replicate(1, rb.size()).array() -
       rb.transpose().replicate(ra.size(), 1).array())
          .abs();
  const Eigen::ArrayXXd a = (std::sqrt(3.0) / p.omega) * h;
  return (p.s2 * (1.0 + a) * (-a).exp()).matrix();
}

/// Gram tile together with its derivative in log(omega). The derivative in
/// log(s2) is the tile itself.
inline void matern_tile_with_grad(const MaternParams& p, const Vec& ra,
                                  const Vec& rb, Mat& value, Mat& dlogomega) {
  const Eigen::ArrayXXd h =
      (ra.replicate(1, rb.size()).array() -
       rb.transpose().replicate(ra.size(), 1).array())
          .abs();
  const Eigen::ArrayXXd a = (std::sqrt(3.0) / p.omega) * h;
  const Eigen::ArrayXXd e = (-a).exp();
  value = (p.s2 * (1.0 + a) * e).matrix();
  dlogomega = (p.s2 * a.square() * e).matrix();
}

// ---------------------------------------------------------------------------
// Covariance assembly
// ---------------------------------------------------------------------------

/// Dense prior covariance of the stacked velocity field (noise excluded).
/// Agent blocks couple only within a type; the (i, j) block for type p sums
/// the class-1 and class-2 displacement tiles under theta(p, 1), theta(p, 2).
inline Mat assemble_train_cov(const GpTrainData& data, const GpHyperparams& hyper) {
  hyper.validate();
  const SpeciesConfig& sc = data.species;
  const int d = sc.dim;
  const int n = sc.n();
  const int nb = data.num_obs() * n;
  const double inv_n2 = 1.0 / (static_cast<double>(n) * n);
  Mat K = Mat::Zero(data.rows(), data.rows());
  for (int b1 = 0; b1 < nb; ++b1) {
    const int p1 = sc.type_of(b1 % n);
    for (int b2 = b1; b2 < nb; ++b2) {
      if (sc.type_of(b2 % n) != p1) continue;
      Mat block = Mat::Zero(d, d);
      for (int q = 1; q <= 2; ++q) {
        const GpTrainData::Slice& s1 = data.pairs[b1][q - 1];
        const GpTrainData::Slice& s2 = data.pairs[b2][q - 1];
        if (s1.dist.size() == 0 || s2.dist.size() == 0) continue;
        block.noalias() +=
            s1.disp * matern_tile(hyper.theta(p1, q), s1.dist, s2.dist) *
            s2.disp.transpose();
      }
      block *= inv_n2;
      K.block(b1 * d, b2 * d, d, d) = block;
      if (b2 != b1) K.block(b2 * d, b1 * d, d, d) = block.transpose();
    }
  }
  return K;
}

/// Covariance between the stacked velocity field and phi^{pq} on a grid of
/// query distances. Rows for agents outside type p are identically zero.
inline Mat assemble_cross_cov(const GpTrainData& data, const GpHyperparams& hyper,
                              int p, int q, const std::vector<double>& grid) {
  hyper.validate();
  if (p < 1 || p > 2 || q < 1 || q > 2)
    throw std::invalid_argument("assemble_cross_cov: class indices must be 1 or 2");
  const SpeciesConfig& sc = data.species;
  const int d = sc.dim;
  const int n = sc.n();
  const int nb = data.num_obs() * n;
  const Vec g = Eigen::Map<const Vec>(grid.data(), static_cast<Eigen::Index>(grid.size()));
  Mat out = Mat::Zero(data.rows(), g.size());
  for (int b = 0; b < nb; ++b) {
    if (sc.type_of(b % n) != p) continue;
    const GpTrainData::Slice& s = data.pairs[b][q - 1];
    if (s.dist.size() == 0) continue;
    out.middleRows(b * d, d).noalias() =
        s.disp * matern_tile(hyper.theta(p, q), s.dist, g) / n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Marginal likelihood
// ---------------------------------------------------------------------------

namespace detail {

struct CholResult {
  Eigen::LLT<Mat> llt;
  double jitter = 0.0;
};

/// Cholesky of K + sigma2 I with escalating diagonal jitter. Jitter starts
/// at 1e-12 of the mean diagonal and grows tenfold up to 1e-6 of it.
inline CholResult chol_with_jitter(Mat ky, double sigma2) {
  ky.diagonal().array() += sigma2;
  const double scale = ky.diagonal().mean();
  CholResult r;
  r.llt.compute(ky);
  if (r.llt.info() == Eigen::Success) return r;
  for (double j = 1e-12 * scale; j <= 1.0000001e-6 * scale; j *= 10.0) {
    Mat jk = ky;
    jk.diagonal().array() += j;
    r.llt.compute(jk);
    if (r.llt.info() == Eigen::Success) {
      r.jitter = j;
      return r;
    }
  }
  throw std::runtime_error(
      "chol_with_jitter: covariance not positive definite even with jitter");
}

inline double log_det_from_llt(const Eigen::LLT<Mat>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// Negative log marginal likelihood of the observations under the stacked
/// GP model: 1/2 z^T (K + s2 I)^{-1} z + 1/2 log det(K + s2 I) + n/2 log 2pi.
inline double nlml(const GpTrainData& data, const GpHyperparams& hyper) {
  const Mat k = assemble_train_cov(data, hyper);
  const auto chol = detail::chol_with_jitter(k, hyper.sigma2);
  const Vec gamma = chol.llt.solve(data.z);
  const double n = static_cast<double>(data.rows());
  return 0.5 * data.z.dot(gamma) + 0.5 * detail::log_det_from_llt(chol.llt) +
         0.5 * n * std::log(2.0 * M_PI);
}

/// Value and gradient of the negative log marginal likelihood in the
/// 9-dimensional log parameterization. Uses d nlml / d theta =
/// -1/2 tr((gamma gamma^T - Ky^{-1}) dK/dtheta), accumulated tile by tile so
/// no derivative matrix is ever materialized.
inline double nlml_grad(const GpTrainData& data, const GpHyperparams& hyper,
                        Vec& grad) {
  const SpeciesConfig& sc = data.species;
  const int d = sc.dim;
  const int n = sc.n();
  const int nb = data.num_obs() * n;
  const double inv_n2 = 1.0 / (static_cast<double>(n) * n);

  const Mat k = assemble_train_cov(data, hyper);
  const auto chol = detail::chol_with_jitter(k, hyper.sigma2);
  const Vec gamma = chol.llt.solve(data.z);
  const double rows = static_cast<double>(data.rows());
  const double value = 0.5 * data.z.dot(gamma) +
                       0.5 * detail::log_det_from_llt(chol.llt) +
                       0.5 * rows * std::log(2.0 * M_PI);

  // A = gamma gamma^T - Ky^{-1}; d nlml/d theta_j = -1/2 <A, dK/dtheta_j>.
  Mat a = chol.llt.solve(Mat::Identity(data.rows(), data.rows()));
  a = (gamma * gamma.transpose() - a).eval();

  grad = Vec::Zero(kNumLogParams);
  auto grad_index = [](int p, int q) { return 4 * (p - 1) + 2 * (q - 1); };
  Mat tile, tile_domega;
  for (int b1 = 0; b1 < nb; ++b1) {
    const int p1 = sc.type_of(b1 % n);
    for (int b2 = b1; b2 < nb; ++b2) {
      if (sc.type_of(b2 % n) != p1) continue;
      const double mult = (b1 == b2 ? 1.0 : 2.0) * inv_n2;
      const Mat a_block = a.block(b1 * d, b2 * d, d, d);
      for (int q = 1; q <= 2; ++q) {
        const GpTrainData::Slice& s1 = data.pairs[b1][q - 1];
        const GpTrainData::Slice& s2 = data.pairs[b2][q - 1];
        if (s1.dist.size() == 0 || s2.dist.size() == 0) continue;
        matern_tile_with_grad(hyper.theta(p1, q), s1.dist, s2.dist, tile,
                              tile_domega);
        const Mat w = s1.disp.transpose() * a_block * s2.disp;
        grad[grad_index(p1, q)] += mult * (w.array() * tile.array()).sum();
        grad[grad_index(p1, q) + 1] +=
            mult * (w.array() * tile_domega.array()).sum();
      }
    }
  }
  grad *= -0.5;
  grad[8] = -0.5 * hyper.sigma2 * a.trace();
  return value;
}

// ---------------------------------------------------------------------------
// Fitting and posterior evaluation
// ---------------------------------------------------------------------------

struct FitOptions {
  /// Refuse dense factorization beyond this many rows; the conjugate
  /// gradient path below has no such cap.
  int dense_cap = 4000;
};

/// A trained dense model: Cholesky factor of Ky and the representer weights
/// gamma = Ky^{-1} z.
struct GpModel {
  std::shared_ptr<const GpTrainData> data;
  GpHyperparams hyper;
  Eigen::LLT<Mat> llt;
  Vec gamma;
  double jitter = 0.0;
};

inline GpModel fit(std::shared_ptr<const GpTrainData> data,
                   const GpHyperparams& hyper, const FitOptions& opts = {}) {
  if (!data) throw std::invalid_argument("fit: null data");
  if (data->rows() > opts.dense_cap)
    throw std::invalid_argument(
        "fit: problem size " + std::to_string(data->rows()) +
        " exceeds the dense cap " + std::to_string(opts.dense_cap) +
        "; use the conjugate-gradient path");
  hyper.validate();
  GpModel m;
  m.data = std::move(data);
  m.hyper = hyper;
  auto chol = detail::chol_with_jitter(assemble_train_cov(*m.data, hyper),
                                       hyper.sigma2);
  m.llt = std::move(chol.llt);
  m.jitter = chol.jitter;
  m.gamma = m.llt.solve(m.data->z);
  return m;
}

struct PosteriorPoint {
  double mean = 0.0;
  double var = 0.0;
};

/// Posterior of phi^{pq} at a single query distance: mean k*^T gamma and
/// variance K(r*, r*) - ||L^{-1} k*||^2.
inline PosteriorPoint posterior(const GpModel& m, int p, int q, double rstar) {
  const Mat kstar = assemble_cross_cov(*m.data, m.hyper, p, q, {rstar});
  PosteriorPoint out;
  out.mean = kstar.col(0).dot(m.gamma);
  const Vec v = m.llt.matrixL().solve(kstar.col(0));
  out.var = matern32(m.hyper.theta(p, q), rstar, rstar) - v.squaredNorm();
  return out;
}

/// Representer weights of phi^{pq}: one coefficient per (observation, agent
/// of type p, neighbor of class q) atom, c_a = disp_a . gamma_block / N.
/// The posterior mean is then sum_a c_a K(r_a, .), which matches the k*^T
/// gamma route exactly but costs O(atoms) per query point.
struct AtomExpansion {
  std::vector<double> r;  ///< atom distances, ordering (o, i, k) ascending
  Vec coeff;
};

inline AtomExpansion atom_expansion(const GpTrainData& data, const Vec& gamma,
                                    int p, int q) {
  const SpeciesConfig& sc = data.species;
  const int d = sc.dim;
  const int n = sc.n();
  const int nb = data.num_obs() * n;
  AtomExpansion e;
  std::vector<double> coeffs;
  for (int b = 0; b < nb; ++b) {
    if (sc.type_of(b % n) != p) continue;
    const GpTrainData::Slice& s = data.pairs[b][q - 1];
    const Vec c = s.disp.transpose() * gamma.segment(b * d, d) / n;
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      e.r.push_back(s.dist[j]);
      coeffs.push_back(c[j]);
    }
  }
  e.coeff = Eigen::Map<Vec>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
  return e;
}

inline Vec mean_curve_from_atoms(const GpHyperparams& hyper, int p, int q,
                                 const AtomExpansion& e,
                                 const std::vector<double>& grid) {
  const Vec ra = Eigen::Map<const Vec>(e.r.data(), static_cast<Eigen::Index>(e.r.size()));
  const Vec g = Eigen::Map<const Vec>(grid.data(), static_cast<Eigen::Index>(grid.size()));
  if (ra.size() == 0) return Vec::Zero(g.size());
  // Chunked so dense grids against large atom sets stay within a few MB.
  Vec out(g.size());
  const Eigen::Index chunk = 128;
  for (Eigen::Index start = 0; start < g.size(); start += chunk) {
    const Eigen::Index len = std::min(chunk, g.size() - start);
    const Vec gc = g.segment(start, len);
    out.segment(start, len).noalias() =
        matern_tile(hyper.theta(p, q), gc, ra) * e.coeff;
  }
  return out;
}

struct PosteriorCurve {
  Vec mean;
  Vec var;  ///< empty unless requested
};

/// Posterior mean (and optionally variance) of phi^{pq} on a grid. Means go
/// through the atom expansion; variances use the Cholesky route per point,
/// which dominates the cost and is therefore opt-in.
inline PosteriorCurve posterior_curve(const GpModel& m, int p, int q,
                                      const std::vector<double>& grid,
                                      bool with_variance = false) {
  PosteriorCurve out;
  const AtomExpansion e = atom_expansion(*m.data, m.gamma, p, q);
  out.mean = mean_curve_from_atoms(m.hyper, p, q, e, grid);
  if (with_variance) {
    // One triangular solve with all grid columns beats a per-point loop.
    Mat v = assemble_cross_cov(*m.data, m.hyper, p, q, grid);
    m.llt.matrixL().solveInPlace(v);
    out.var.resize(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t j = 0; j < grid.size(); ++j)
      out.var[static_cast<Eigen::Index>(j)] =
          matern32(m.hyper.theta(p, q), grid[j], grid[j]) -
          v.col(static_cast<Eigen::Index>(j)).squaredNorm();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hyperparameter optimization
// ---------------------------------------------------------------------------

struct OptimizeOptions {
  int iterations = 50;
  bool pin_sigma = false;  ///< keep sigma2 fixed at its initial value
};

struct OptimizeResult {
  GpHyperparams hyper;
  double nlml = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
};

/// Default prior scales: unit amplitude, length-scale set from the data
/// spread, noise from the known observation level (floored to keep the
/// system well conditioned). Half the spread keeps the prior smooth enough
/// that the small-noise error floor stays close to the noise-free limit;
/// shorter scales inflate that floor faster than they help at high noise.
inline GpHyperparams default_hyperparams(const GpTrainData& data,
                                         double sigma_obs) {
  GpHyperparams h;
  const double omega = std::max(0.5 * data.max_distance, 0.1);
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) h.theta(p, q) = MaternParams{1.0, omega};
  const double s = std::max(sigma_obs, 1e-3);
  h.sigma2 = s * s;
  return h;
}

/// Maximizes the marginal likelihood over all Matérn amplitudes and
/// length-scales (and optionally the noise) jointly, in log space.
inline OptimizeResult optimize_hyperparams(const GpTrainData& data,
                                           const GpHyperparams& init,
                                           const OptimizeOptions& opts = {}) {
  init.validate();
  const double pinned_sigma2 = init.sigma2;
  const int dim = opts.pin_sigma ? kNumLogParams - 1 : kNumLogParams;
  Vec x0 = hyperparams_to_log(init).head(dim);

  auto unpack = [&](const Vec& x) {
    Vec full(kNumLogParams);
    full.head(dim) = x;
    if (opts.pin_sigma) full[8] = std::log(std::max(pinned_sigma2, 1e-300));
    GpHyperparams h = hyperparams_from_log(full);
    if (opts.pin_sigma) h.sigma2 = pinned_sigma2;
    return h;
  };

  LbfgsOptions lopts;
  lopts.max_iters = opts.iterations;
  auto objective = [&](const Vec& x, Vec& g_out) {
    // Long line-search steps can probe points where exp overflows or the
    // factorization fails; report an infinite value so the search backtracks.
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 40.0) {
      g_out = Vec::Zero(dim);
      return std::numeric_limits<double>::infinity();
    }
    try {
      Vec g_full;
      const double value = nlml_grad(data, unpack(x), g_full);
      g_out = g_full.head(dim);
      return value;
    } catch (const std::runtime_error&) {
      g_out = Vec::Zero(dim);
      return std::numeric_limits<double>::infinity();
    }
  };
  const LbfgsResult r = lbfgs_minimize(objective, x0, lopts);

  OptimizeResult out;
  out.hyper = unpack(r.x);
  out.nlml = r.fx;
  out.iterations = r.iterations;
  out.evaluations = r.evaluations;
  return out;
}

// ---------------------------------------------------------------------------
// Matrix-free path for large datasets
// ---------------------------------------------------------------------------

/// Matrix-free representation of Ky = sigma2 I + sum_pq Phi_pq G_pq Phi_pq^T,
/// where Phi_pq scatters atom weights into agent rows and G_pq is the Matérn
/// Gram over atom distances, multiplied in O(atoms) via its semiseparable
/// structure. Memory stays linear in the number of atoms.
class MatvecModel {
 public:
  MatvecModel(std::shared_ptr<const GpTrainData> data, GpHyperparams hyper)
      : data_(std::move(data)), hyper_(std::move(hyper)) {
    if (!data_) throw std::invalid_argument("MatvecModel: null data");
    hyper_.validate();
    const SpeciesConfig& sc = data_->species;
    const int n = sc.n();
    const int nb = data_->num_obs() * n;
    for (int p = 1; p <= 2; ++p) {
      for (int q = 1; q <= 2; ++q) {
        Part& part = parts_[index(p, q)];
        for (int b = 0; b < nb; ++b) {
          if (sc.type_of(b % n) != p) continue;
          const GpTrainData::Slice& s = data_->pairs[b][q - 1];
          for (Eigen::Index j = 0; j < s.dist.size(); ++j)
            part.r.push_back(s.dist[j]);
        }
        if (!part.r.empty())
          part.gram = std::make_unique<SemiseparableMatern>(part.r);
      }
    }
    build_diagonal();
  }

  const Vec& diagonal() const { return diag_; }
  const GpHyperparams& hyper() const { return hyper_; }
  const GpTrainData& data() const { return *data_; }

  Vec multiply(const Vec& v) const {
    Vec out = hyper_.sigma2 * v;
    for (int p = 1; p <= 2; ++p) {
      for (int q = 1; q <= 2; ++q) {
        const Part& part = parts_[index(p, q)];
        if (part.r.empty()) continue;
        // w = Phi^T v: per atom, displacement dot the agent segment / N.
        Vec w(static_cast<Eigen::Index>(part.r.size()));
        gather(part, p, q, v, w);
        const Vec gw = part.gram->multiply(hyper_.theta(p, q), w);
        scatter(part, p, q, gw, out);
      }
    }
    return out;
  }

 private:
  struct Part {
    std::vector<double> r;
    std::unique_ptr<SemiseparableMatern> gram;
  };

  static int index(int p, int q) { return 2 * (p - 1) + (q - 1); }

  void gather(const Part& part, int p, int q, const Vec& v, Vec& w) const {
    const SpeciesConfig& sc = data_->species;
    const int d = sc.dim;
    const int n = sc.n();
    Eigen::Index a = 0;
    const int nb = data_->num_obs() * n;
    for (int b = 0; b < nb; ++b) {
      if (sc.type_of(b % n) != p) continue;
      const GpTrainData::Slice& s = data_->pairs[b][q - 1];
      if (s.dist.size() == 0) continue;
      w.segment(a, s.dist.size()).noalias() =
          s.disp.transpose() * v.segment(b * d, d) / n;
      a += s.dist.size();
    }
  }

  void scatter(const Part& part, int p, int q, const Vec& gw, Vec& out) const {
    const SpeciesConfig& sc = data_->species;
    const int d = sc.dim;
    const int n = sc.n();
    Eigen::Index a = 0;
    const int nb = data_->num_obs() * n;
    for (int b = 0; b < nb; ++b) {
      if (sc.type_of(b % n) != p) continue;
      const GpTrainData::Slice& s = data_->pairs[b][q - 1];
      if (s.dist.size() == 0) continue;
      out.segment(b * d, d).noalias() += s.disp * gw.segment(a, s.dist.size()) / n;
      a += s.dist.size();
    }
  }

  void build_diagonal() {
    const SpeciesConfig& sc = data_->species;
    const int d = sc.dim;
    const int n = sc.n();
    const int nb = data_->num_obs() * n;
    const double inv_n2 = 1.0 / (static_cast<double>(n) * n);
    diag_ = Vec::Constant(data_->rows(), hyper_.sigma2);
    for (int b = 0; b < nb; ++b) {
      const int p = sc.type_of(b % n);
      for (int q = 1; q <= 2; ++q) {
        const GpTrainData::Slice& s = data_->pairs[b][q - 1];
        if (s.dist.size() == 0) continue;
        const Mat block =
            s.disp * matern_tile(hyper_.theta(p, q), s.dist, s.dist) *
            s.disp.transpose() * inv_n2;
        diag_.segment(b * d, d) += block.diagonal();
      }
    }
  }

  std::shared_ptr<const GpTrainData> data_;
  GpHyperparams hyper_;
  std::array<Part, 4> parts_;
  Vec diag_;
};

struct CgOptions {
  double tol = 1e-10;  ///< relative residual target
  int max_iters = 20000;
};

struct CgResult {
  Vec x;
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

/// Jacobi-preconditioned conjugate gradients on the matrix-free model.
inline CgResult pcg_solve(const MatvecModel& model, const Vec& b,
                          const CgOptions& opts = {}) {
  const Vec& diag = model.diagonal();
  const Vec inv_diag = diag.cwiseMax(1e-300).cwiseInverse();
  const double bnorm = b.norm();
  CgResult res;
  res.x = Vec::Zero(b.size());
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  Vec r = b;
  Vec z = inv_diag.cwiseProduct(r);
  Vec p = z;
  double rz = r.dot(z);
  for (int it = 0; it < opts.max_iters; ++it) {
    const Vec ap = model.multiply(p);
    const double alpha = rz / p.dot(ap);
    res.x += alpha * p;
    r -= alpha * ap;
    res.iterations = it + 1;
    res.rel_residual = r.norm() / bnorm;
    if (res.rel_residual < opts.tol) {
      res.converged = true;
      break;
    }
    z = inv_diag.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return res;
}

/// Mean-only model solved by conjugate gradients; posterior mean curves come
/// out of the atom expansion exactly as in the dense path.
struct GpMeanModel {
  std::shared_ptr<const GpTrainData> data;
  GpHyperparams hyper;
  Vec gamma;
  CgResult solve_info;
};

inline GpMeanModel fit_mean_cg(std::shared_ptr<const GpTrainData> data,
                               const GpHyperparams& hyper,
                               const CgOptions& opts = {}) {
  MatvecModel model(data, hyper);
  GpMeanModel m;
  m.data = std::move(data);
  m.hyper = hyper;
  m.solve_info = pcg_solve(model, m.data->z, opts);
  if (!m.solve_info.converged)
    throw std::runtime_error(
        "fit_mean_cg: conjugate gradients stalled at relative residual " +
        std::to_string(m.solve_info.rel_residual));
  m.gamma = m.solve_info.x;
  return m;
}

inline Vec posterior_mean_curve(const GpMeanModel& m, int p, int q,
                                const std::vector<double>& grid) {
  const AtomExpansion e = atom_expansion(*m.data, m.gamma, p, q);
  return mean_curve_from_atoms(m.hyper, p, q, e, grid);
}

}  // namespace swarmgp

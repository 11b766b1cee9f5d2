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

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "swarmgp/common.hpp"
#include "swarmgp/gp.hpp"
#include "swarmgp/kernels.hpp"

namespace swarmgp {

// Kernel ridge regression over the span of kernel sections at the observed
// pair distances. This is a deliberately separate estimation route from the
// Gaussian-process layer: it assembles the force covariance from explicit
// pair-scatter matrices and solves with dense LU instead of Cholesky. With a
// shared ridge weight lambda and observation noise sigma2, a Gaussian process
// whose prior amplitudes are scaled by sigma2 / (lambda N ML) reproduces the
// ridge minimizer as its posterior mean, which the tests exercise as a
// cross-check of both implementations.

/// Pair geometry of one kernel component in explicit matrix form. Column a of
/// scatter holds the displacement of pair a in the rows of its first agent,
/// so candidate forces are scatter * K(r, r) * c / N.
struct RidgeAtoms {
  Vec r;        ///< pair distances, ordered (observation, agent i, agent k)
  Mat scatter;  ///< rows() x atoms
};

inline RidgeAtoms ridge_atoms(const GpTrainData& data, int p, int q) {
  if (p < 1 || p > 2 || q < 1 || q > 2)
    throw std::invalid_argument("ridge_atoms: species indices must be 1 or 2");
  const SpeciesConfig& sc = data.species;
  const int d = sc.dim;
  const int n = sc.n();

  Eigen::Index count = 0;
  for (int b = 0; b < data.num_obs() * n; ++b)
    if (sc.type_of(b % n) == p)
      count += data.pairs[static_cast<std::size_t>(b)][q - 1].dist.size();

  RidgeAtoms out;
  out.r.resize(count);
  out.scatter = Mat::Zero(data.rows(), count);
  Eigen::Index col = 0;
  for (int b = 0; b < data.num_obs() * n; ++b) {
    if (sc.type_of(b % n) != p) continue;
    const GpTrainData::Slice& s = data.pairs[static_cast<std::size_t>(b)][q - 1];
    const Eigen::Index c = s.dist.size();
    out.r.segment(col, c) = s.dist;
    out.scatter.block(static_cast<Eigen::Index>(b) * d, col, d, c) = s.disp;
    col += c;
  }
  return out;
}

/// Force covariance assembled from the scatter matrices,
/// sum_pq S_pq K_pq S_pq^T / N^2. Equals the blockwise assembly of the
/// Gaussian-process layer; the equality is a test invariant.
inline Mat ridge_force_cov(const GpTrainData& data,
                           const std::array<RidgeAtoms, 4>& atoms,
                           const GpHyperparams& base) {
  const double inv_n2 = 1.0 / (static_cast<double>(data.species.n()) *
                               data.species.n());
  Mat kf = Mat::Zero(data.rows(), data.rows());
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) {
      const RidgeAtoms& a = atoms[2 * (p - 1) + (q - 1)];
      if (a.r.size() == 0) continue;
      kf.noalias() +=
          inv_n2 * a.scatter *
          (matern_tile(base.theta(p, q), a.r, a.r) * a.scatter.transpose());
    }
  return kf;
}

struct RidgeModel {
  GpHyperparams base;  ///< unscaled kernel parameters (sigma2 unused here)
  double lambda = 0.0;
  double shift = 0.0;  ///< lambda * N * ML, the ridge term on the force scale
  int n = 0;           ///< total agent count N
  std::array<RidgeAtoms, 4> atoms;
  std::array<AtomExpansion, 4> expansion;  ///< index 2(p-1)+(q-1)
  Eigen::PartialPivLU<Mat> reg_lu;         ///< LU of K_F + shift I

  const AtomExpansion& component(int p, int q) const {
    if (p < 1 || p > 2 || q < 1 || q > 2)
      throw std::invalid_argument("RidgeModel: species indices must be 1 or 2");
    return expansion[2 * (p - 1) + (q - 1)];
  }
};

/// Minimizes the regularized empirical force risk
///   1/(ML N) sum |F_phi(X) - Z|^2 + lambda sum_pq |phi_pq|^2_H
/// over atom expansions. Coefficients come from the dual system:
/// c_pq = S_pq^T (K_F + lambda N ML I)^{-1} Z / N.
inline RidgeModel ridge_fit(const GpTrainData& data, const GpHyperparams& base,
                            double lambda) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("ridge_fit: lambda must be > 0");
  base.validate();
  const int n = data.species.n();

  RidgeModel m;
  m.base = base;
  m.lambda = lambda;
  m.shift = lambda * n * data.num_obs();
  m.n = n;
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q)
      m.atoms[2 * (p - 1) + (q - 1)] = ridge_atoms(data, p, q);

  Mat reg = ridge_force_cov(data, m.atoms, base);
  reg.diagonal().array() += m.shift;
  m.reg_lu.compute(reg);
  const Vec gamma = m.reg_lu.solve(data.z);

  for (int idx = 0; idx < 4; ++idx) {
    const RidgeAtoms& a = m.atoms[static_cast<std::size_t>(idx)];
    AtomExpansion& e = m.expansion[static_cast<std::size_t>(idx)];
    e.r.assign(a.r.data(), a.r.data() + a.r.size());
    e.coeff = a.scatter.transpose() * gamma / n;
  }
  return m;
}

/// Ridge estimate of one interaction kernel on a grid.
inline Vec ridge_curve(const RidgeModel& m, int p, int q,
                       const std::vector<double>& grid) {
  return mean_curve_from_atoms(m.base, p, q, m.component(p, q), grid);
}

/// Posterior variance predicted by the ridge picture for a Gaussian process
/// with prior amplitude sigma2 / (lambda N ML) on the base kernels:
///   sigma2 / (lambda N ML) [K(r,r) - k^T (K_F + lambda N ML I)^{-1} k].
inline double ridge_variance(const RidgeModel& m, double sigma2, int p, int q,
                             double rstar) {
  if (!(sigma2 > 0.0))
    throw std::invalid_argument("ridge_variance: sigma2 must be > 0");
  const RidgeAtoms& a = m.atoms[static_cast<std::size_t>(2 * (p - 1) + (q - 1))];
  const MaternParams& theta = m.base.theta(p, q);
  double fitted = 0.0;
  if (a.r.size() > 0) {
    Vec rs(1);
    rs[0] = rstar;
    const Vec k = a.scatter * matern_tile(theta, a.r, rs).col(0) / m.n;
    fitted = k.dot(m.reg_lu.solve(k));
  }
  return sigma2 / m.shift * (matern32(theta, rstar, rstar) - fitted);
}

/// Same minimizer through the primal normal equations: for each observed
/// species p the components (p,1) and (p,2) couple into one square system
///   (S_pq^T S_pq K_pq + lambda N^3 ML I) c_pq + S_pq^T S_pq' K_pq' c_pq'
///     = N S_pq^T Z.
/// The system matrix is a product of symmetric PSD factors plus a positive
/// shift, so its eigenvalues stay >= shift and LU applies; it is not
/// symmetric, which keeps this route independent of the dual solve.
inline std::array<Vec, 4> ridge_fit_normal_eq(const GpTrainData& data,
                                              const GpHyperparams& base,
                                              double lambda) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("ridge_fit_normal_eq: lambda must be > 0");
  base.validate();
  const int n = data.species.n();
  const double shift =
      lambda * static_cast<double>(n) * n * n * data.num_obs();

  std::array<Vec, 4> out;
  for (int p = 1; p <= 2; ++p) {
    const RidgeAtoms a1 = ridge_atoms(data, p, 1);
    const RidgeAtoms a2 = ridge_atoms(data, p, 2);
    const Eigen::Index t1 = a1.r.size();
    const Eigen::Index t2 = a2.r.size();
    Mat sys(t1 + t2, t1 + t2);
    sys.topLeftCorner(t1, t1).noalias() =
        a1.scatter.transpose() * a1.scatter * matern_tile(base.theta(p, 1), a1.r, a1.r);
    sys.topRightCorner(t1, t2).noalias() =
        a1.scatter.transpose() * a2.scatter * matern_tile(base.theta(p, 2), a2.r, a2.r);
    sys.bottomLeftCorner(t2, t1).noalias() =
        a2.scatter.transpose() * a1.scatter * matern_tile(base.theta(p, 1), a1.r, a1.r);
    sys.bottomRightCorner(t2, t2).noalias() =
        a2.scatter.transpose() * a2.scatter * matern_tile(base.theta(p, 2), a2.r, a2.r);
    sys.diagonal().array() += shift;

    Vec rhs(t1 + t2);
    rhs.head(t1) = n * a1.scatter.transpose() * data.z;
    rhs.tail(t2) = n * a2.scatter.transpose() * data.z;

    const Vec c = Eigen::PartialPivLU<Mat>(sys).solve(rhs);
    out[static_cast<std::size_t>(2 * (p - 1))] = c.head(t1);
    out[static_cast<std::size_t>(2 * (p - 1) + 1)] = c.tail(t2);
  }
  return out;
}

/// Regularized empirical force risk of an arbitrary atom-expansion candidate,
/// 1/(ML N) sum_obs,i |f_i - z_i|^2 + lambda sum_pq c_pq^T K_pq c_pq.
inline double ridge_risk(const GpTrainData& data, const GpHyperparams& base,
                         double lambda,
                         const std::array<AtomExpansion, 4>& phi) {
  base.validate();
  const SpeciesConfig& sc = data.species;
  const int d = sc.dim;
  const int n = sc.n();

  double sq = 0.0;
  for (int b = 0; b < data.num_obs() * n; ++b) {
    const int p = sc.type_of(b % n);
    Vec f = Vec::Zero(d);
    for (int q = 1; q <= 2; ++q) {
      const GpTrainData::Slice& s = data.pairs[static_cast<std::size_t>(b)][q - 1];
      if (s.dist.size() == 0) continue;
      const AtomExpansion& e = phi[static_cast<std::size_t>(2 * (p - 1) + (q - 1))];
      if (e.coeff.size() == 0) continue;
      const Vec er = Eigen::Map<const Vec>(e.r.data(),
                                           static_cast<Eigen::Index>(e.r.size()));
      const Vec vals =
          matern_tile(base.theta(p, q), er, s.dist).transpose() * e.coeff;
      f.noalias() += s.disp * vals / n;
    }
    sq += (f - data.z.segment(static_cast<Eigen::Index>(b) * d, d)).squaredNorm();
  }

  double norm = 0.0;
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) {
      const AtomExpansion& e = phi[static_cast<std::size_t>(2 * (p - 1) + (q - 1))];
      if (e.coeff.size() == 0) continue;
      const Vec er = Eigen::Map<const Vec>(e.r.data(),
                                           static_cast<Eigen::Index>(e.r.size()));
      norm += e.coeff.dot(matern_tile(base.theta(p, q), er, er) * e.coeff);
    }
  return sq / (static_cast<double>(data.num_obs()) * n) + lambda * norm;
}

/// Gaussian-process prior that reproduces the ridge estimator at observation
/// noise sigma2: every base amplitude is scaled by sigma2 / (lambda N ML).
/// The correspondence needs one shared lambda across all four components.
inline GpHyperparams gp_prior_for_ridge(const GpHyperparams& base, double sigma2,
                                        int num_obs, int n, double lambda) {
  if (!(lambda > 0.0) || !(sigma2 > 0.0))
    throw std::invalid_argument("gp_prior_for_ridge: lambda and sigma2 must be > 0");
  if (num_obs < 1 || n < 1)
    throw std::invalid_argument("gp_prior_for_ridge: need num_obs, n >= 1");
  const double scale = sigma2 / (lambda * n * num_obs);
  GpHyperparams h = base;
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) h.theta(p, q).s2 *= scale;
  h.sigma2 = sigma2;
  return h;
}

}  // namespace swarmgp

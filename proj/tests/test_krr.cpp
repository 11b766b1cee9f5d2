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

#include "swarmgp/krr.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "swarmgp/common.hpp"
#include "swarmgp/gp.hpp"
#include "swarmgp/kernels.hpp"

using namespace swarmgp;

namespace {

GpTrainData random_instance(const SpeciesConfig& sc, int num_obs,
                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Mat> states;
  for (int o = 0; o < num_obs; ++o) {
    Mat x(sc.dim, sc.n());
    for (int i = 0; i < sc.n(); ++i)
      for (int c = 0; c < sc.dim; ++c) x(c, i) = rng.uniform(-1.5, 1.5);
    states.push_back(x);
  }
  Vec z(static_cast<Eigen::Index>(num_obs) * sc.dim * sc.n());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return make_train_data(sc, std::move(states), std::move(z));
}

GpHyperparams varied_base() {
  GpHyperparams h;
  h.theta11 = {1.2, 0.8};
  h.theta12 = {0.7, 1.1};
  h.theta21 = {1.9, 0.5};
  h.theta22 = {0.9, 0.7};
  return h;
}

}  // namespace

TEST(RidgeForceCov, ScatterIdentityMatchesBlockAssembly) {
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    SpeciesConfig sc{2, 3, 2};
    const GpTrainData data = random_instance(sc, 3, seed);
    const GpHyperparams base = varied_base();
    std::array<RidgeAtoms, 4> atoms;
    for (int p = 1; p <= 2; ++p)
      for (int q = 1; q <= 2; ++q)
        atoms[2 * (p - 1) + (q - 1)] = ridge_atoms(data, p, q);
    const Mat from_scatter = ridge_force_cov(data, atoms, base);
    const Mat from_blocks = assemble_train_cov(data, base);
    EXPECT_LT((from_scatter - from_blocks).cwiseAbs().maxCoeff(),
              1e-12 * (1.0 + from_blocks.cwiseAbs().maxCoeff()));
  }
}

TEST(RidgeFit, DualAndNormalEquationRoutesAgree) {
  SpeciesConfig sc{2, 2, 2};
  const GpTrainData data = random_instance(sc, 4, 15);
  const GpHyperparams base = varied_base();
  const auto grid = uniform_grid(1.2 * data.max_distance, 60);
  for (double lambda : {1e-4, 1e-2, 1.0}) {
    const RidgeModel dual = ridge_fit(data, base, lambda);
    const std::array<Vec, 4> primal = ridge_fit_normal_eq(data, base, lambda);
    for (int p = 1; p <= 2; ++p)
      for (int q = 1; q <= 2; ++q) {
        const int idx = 2 * (p - 1) + (q - 1);
        const Vec& cd = dual.component(p, q).coeff;
        const Vec& cp = primal[static_cast<std::size_t>(idx)];
        ASSERT_EQ(cd.size(), cp.size());
        const double scale = 1.0 + cd.cwiseAbs().maxCoeff();
        EXPECT_LT((cd - cp).cwiseAbs().maxCoeff(), 1e-7 * scale)
            << "lambda " << lambda << " component " << p << q;
        AtomExpansion e = dual.component(p, q);
        e.coeff = cp;
        const Vec curve_dual = ridge_curve(dual, p, q, grid);
        const Vec curve_primal = mean_curve_from_atoms(base, p, q, e, grid);
        EXPECT_LT((curve_dual - curve_primal).cwiseAbs().maxCoeff(),
                  1e-8 * (1.0 + curve_dual.cwiseAbs().maxCoeff()));
      }
  }
}

TEST(RidgeFit, MatchesGpPosteriorMeanUnderScaledPrior) {
  const double sigma2 = 0.04;
  for (std::uint64_t seed : {31u, 32u, 33u, 34u, 35u}) {
    SpeciesConfig sc{2, 2, 2};
    const GpTrainData data = random_instance(sc, 4, seed);  // M=2, L=2
    const GpHyperparams base = varied_base();
    const auto grid = uniform_grid(1.2 * data.max_distance, 50);
    for (double lambda : {1e-4, 1e-2, 1.0}) {
      const RidgeModel ridge = ridge_fit(data, base, lambda);
      const GpHyperparams prior = gp_prior_for_ridge(
          base, sigma2, data.num_obs(), data.species.n(), lambda);
      const GpModel gp =
          fit(std::make_shared<const GpTrainData>(data), prior);
      for (int p = 1; p <= 2; ++p)
        for (int q = 1; q <= 2; ++q) {
          const Vec krr = ridge_curve(ridge, p, q, grid);
          const Vec mean = posterior_curve(gp, p, q, grid).mean;
          EXPECT_LT((krr - mean).cwiseAbs().maxCoeff(), 1e-8)
              << "seed " << seed << " lambda " << lambda << " component "
              << p << q;
        }
    }
  }
}

TEST(RidgeVariance, MatchesGpPosteriorVariance) {
  const double sigma2 = 0.04;
  for (std::uint64_t seed : {41u, 42u, 43u, 44u, 45u}) {
    SpeciesConfig sc{2, 2, 2};
    const GpTrainData data = random_instance(sc, 4, seed);
    const GpHyperparams base = varied_base();
    for (double lambda : {1e-4, 1e-2, 1.0}) {
      const RidgeModel ridge = ridge_fit(data, base, lambda);
      const GpHyperparams prior = gp_prior_for_ridge(
          base, sigma2, data.num_obs(), data.species.n(), lambda);
      const GpModel gp =
          fit(std::make_shared<const GpTrainData>(data), prior);
      for (int p = 1; p <= 2; ++p)
        for (int q = 1; q <= 2; ++q)
          for (double r : {0.2, 0.8, 1.6, 2.9}) {
            const double from_gp = posterior(gp, p, q, r).var;
            const double from_ridge = ridge_variance(ridge, sigma2, p, q, r);
            // The prior variance sets the natural scale of both sides.
            const double scale = prior.theta(p, q).s2;
            EXPECT_NEAR(from_gp, from_ridge, 1e-8 * scale)
                << "seed " << seed << " lambda " << lambda << " component "
                << p << q << " r " << r;
          }
    }
  }
}

TEST(RidgeRisk, FittedExpansionBeatsPerturbations) {
  SpeciesConfig sc{2, 2, 2};
  const GpTrainData data = random_instance(sc, 4, 51);
  const GpHyperparams base = varied_base();
  const double lambda = 1e-2;
  const RidgeModel m = ridge_fit(data, base, lambda);
  const double best = ridge_risk(data, base, lambda, m.expansion);

  Rng rng(52);
  for (int trial = 0; trial < 100; ++trial) {
    std::array<AtomExpansion, 4> perturbed = m.expansion;
    for (auto& e : perturbed)
      for (Eigen::Index i = 0; i < e.coeff.size(); ++i)
        e.coeff[i] += 0.02 * rng.normal();
    EXPECT_GT(ridge_risk(data, base, lambda, perturbed), best);
  }
}

TEST(RidgeRisk, ZeroCandidateReproducesDataNorm) {
  SpeciesConfig sc{2, 2, 2};
  const GpTrainData data = random_instance(sc, 3, 61);
  std::array<AtomExpansion, 4> zero;
  const double risk = ridge_risk(data, varied_base(), 0.5, zero);
  const double expected =
      data.z.squaredNorm() /
      (static_cast<double>(data.num_obs()) * data.species.n());
  EXPECT_NEAR(risk, expected, 1e-12 * expected);
}

TEST(RidgeFit, ObservationsOnOneSpeciesLeaveOtherKernelsZero) {
  // The force covariance never couples the two observed species, so data
  // supported on species-1 rows cannot move the species-2 estimates.
  SpeciesConfig sc{2, 3, 2};
  GpTrainData data = random_instance(sc, 3, 71);
  for (int o = 0; o < data.num_obs(); ++o)
    for (int i = sc.n1; i < sc.n(); ++i)
      data.z.segment((static_cast<Eigen::Index>(o) * sc.n() + i) * sc.dim,
                     sc.dim)
          .setZero();
  const RidgeModel m = ridge_fit(data, varied_base(), 1e-3);
  const double active = m.component(1, 1).coeff.cwiseAbs().maxCoeff();
  EXPECT_GT(active, 0.0);
  EXPECT_LT(m.component(2, 1).coeff.cwiseAbs().maxCoeff(), 1e-12 * active);
  EXPECT_LT(m.component(2, 2).coeff.cwiseAbs().maxCoeff(), 1e-12 * active);
}

TEST(GpPriorForRidge, ScalesAmplitudesOnly) {
  const GpHyperparams base = varied_base();
  const GpHyperparams h = gp_prior_for_ridge(base, 0.01, 6, 5, 0.1);
  const double scale = 0.01 / (0.1 * 5 * 6);
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) {
      EXPECT_DOUBLE_EQ(h.theta(p, q).s2, base.theta(p, q).s2 * scale);
      EXPECT_DOUBLE_EQ(h.theta(p, q).omega, base.theta(p, q).omega);
    }
  EXPECT_DOUBLE_EQ(h.sigma2, 0.01);
  EXPECT_THROW(gp_prior_for_ridge(base, 0.0, 6, 5, 0.1), std::invalid_argument);
  EXPECT_THROW(gp_prior_for_ridge(base, 0.01, 6, 5, 0.0),
               std::invalid_argument);
}

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

#include "swarmgp/kernels.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/bessel.hpp>
#include <gtest/gtest.h>

#include "swarmgp/common.hpp"

using namespace swarmgp;

namespace {

// Matérn in its modified-Bessel form, evaluated independently of the nu=3/2
// closed form under test: s^2 * 2^(1-nu)/Gamma(nu) * (sqrt(2 nu) h / w)^nu
// * B_nu(sqrt(2 nu) h / w).
double matern_bessel(double s2, double omega, double nu, double h) {
  const double z = std::sqrt(2.0 * nu) * h / omega;
  return s2 * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(z, nu) *
         boost::math::cyl_bessel_k(nu, z);
}

}  // namespace

TEST(Matern, DiagonalIsAmplitude) {
  MaternParams p{2.5, 0.7};
  EXPECT_DOUBLE_EQ(matern32(p, 1.3, 1.3), 2.5);
  EXPECT_DOUBLE_EQ(matern32(p, 0.0, 0.0), 2.5);
}

TEST(Matern, KnownValueAtUnitSeparation) {
  MaternParams p{1.0, 1.0};
  EXPECT_NEAR(matern32(p, 2.0, 1.0), 0.48335, 1e-5);
}

TEST(Matern, ClosedFormMatchesBesselDefinition) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double s2 = rng.uniform(0.1, 4.0);
    const double omega = rng.uniform(0.2, 3.0);
    const double h = rng.uniform(1e-3, 5.0);
    MaternParams p{s2, omega};
    EXPECT_NEAR(matern32(p, h, 0.0), matern_bessel(s2, omega, 1.5, h),
                1e-10 * s2)
        << "s2=" << s2 << " omega=" << omega << " h=" << h;
  }
}

TEST(Matern, Symmetric) {
  Rng rng(7);
  MaternParams p{1.7, 0.9};
  for (int i = 0; i < 50; ++i) {
    const double a = rng.uniform(0.0, 6.0);
    const double b = rng.uniform(0.0, 6.0);
    EXPECT_DOUBLE_EQ(matern32(p, a, b), matern32(p, b, a));
  }
}

TEST(Matern, GramMatricesPositiveSemidefinite) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 50;
    MaternParams p{rng.uniform(0.5, 2.0), rng.uniform(0.2, 2.0)};
    std::vector<double> pts(n);
    for (auto& x : pts) x = rng.uniform(0.0, 8.0);
    Mat G(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) G(i, j) = matern32(p, pts[i], pts[j]);
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-9 * p.s2);
  }
}

TEST(Matern, LogSpacePartialsMatchFiniteDifferences) {
  Rng rng(23);
  for (int i = 0; i < 40; ++i) {
    const double s2 = rng.uniform(0.3, 3.0);
    const double omega = rng.uniform(0.3, 2.0);
    const double r = rng.uniform(0.0, 5.0);
    const double rp = rng.uniform(0.0, 5.0);
    double v, ds2, domega;
    matern32_value_grad({s2, omega}, r, rp, v, ds2, domega);
    EXPECT_DOUBLE_EQ(v, matern32({s2, omega}, r, rp));

    const double h = 1e-6;
    const double fd_s2 = (matern32({s2 * std::exp(h), omega}, r, rp) -
                          matern32({s2 * std::exp(-h), omega}, r, rp)) /
                         (2 * h);
    const double fd_omega = (matern32({s2, omega * std::exp(h)}, r, rp) -
                             matern32({s2, omega * std::exp(-h)}, r, rp)) /
                            (2 * h);
    EXPECT_NEAR(ds2, fd_s2, 1e-7 * s2);
    EXPECT_NEAR(domega, fd_omega, 1e-7 * s2);
  }
}

TEST(TruthFunctions, FixedPoints) {
  EXPECT_DOUBLE_EQ(truth_g3(1.0), 1.0);
  EXPECT_DOUBLE_EQ(truth_g5(1.0), 0.0);
  EXPECT_NEAR(truth_g0(1.0), 1.0642203743, 1e-12);
  EXPECT_THROW(truth_g0(0.0), std::domain_error);
  EXPECT_THROW(truth_g0(-1.0), std::domain_error);
}

TEST(TruncateSingular, ExponentialIsFixedPoint) {
  RadialKernel f{[](double r) { return std::exp(-r); }, std::nullopt, "exp(-r)"};
  RadialKernel g = truncate_singular(f, 0.8);
  for (double r = 0.0; r < 2.0; r += 0.05) {
    EXPECT_NEAR(g(r), f(r), 1e-9);
  }
}

TEST(TruncateSingular, SeamIsC1) {
  auto raw = [](double r) { return truth_g0(0.5 * r * r); };
  RadialKernel g =
      truncate_singular({raw, std::nullopt, "G0(r^2/2)"}, 0.25);

  const double rc = 0.25;
  EXPECT_NEAR(g(rc - 1e-9), raw(rc), 1e-6);
  // Second-order one-sided stencils on each side of the seam. The second
  // derivative jumps there, so only one-sided estimates can certify the
  // first-derivative match.
  const double eps = 1e-4;
  const double left = (3.0 * g(rc) - 4.0 * g(rc - eps) + g(rc - 2 * eps)) /
                      (2 * eps);
  const double right = (-3.0 * g(rc) + 4.0 * g(rc + eps) - g(rc + 2 * eps)) /
                       (2 * eps);
  EXPECT_NEAR(left, right, 1e-5 * std::max(1.0, std::abs(right)));
}

TEST(TruncateSingular, MatchedCoefficientsAgreeWithAnalyticSolve) {
  // For f(r) = G0(r^2/2) at r_cut = 0.25 the matching pair (a, b) follows in
  // closed form from f(rc) and f'(rc) = (-2 - x^(-5/4)/4) rc with x = rc^2/2.
  const double rc = 0.25;
  const double x = 0.5 * rc * rc;
  const double frc = 1.0 + 2.0 * (1.0 - x) + std::pow(x, -0.25) - 0.9357796257;
  const double fprc = (-2.0 - 0.25 * std::pow(x, -1.25)) * rc;
  const double b = -fprc / frc;
  const double a = frc * std::exp(b * rc);

  RadialKernel g = truncate_singular(
      {[](double r) { return truth_g0(0.5 * r * r); }, std::nullopt, ""}, rc);
  for (double r : {0.02, 0.1, 0.2, 0.249}) {
    EXPECT_NEAR(g(r), a * std::exp(-b * r), 1e-8 * std::abs(a));
  }
  // Above the cut the original formula applies untouched.
  for (double r : {0.25, 0.3, 1.0, 2.5}) {
    EXPECT_DOUBLE_EQ(g(r), truth_g0(0.5 * r * r));
  }
}

TEST(TruncateSingular, RejectsZeroValueAtCut) {
  RadialKernel f{[](double r) { return r - 0.5; }, std::nullopt, "r-1/2"};
  EXPECT_THROW(truncate_singular(f, 0.5), std::invalid_argument);
}

TEST(Presets, RepulsiveCouplingIsHalfIntraAndSymmetric) {
  KernelSet ks = preset("repulsive");
  for (double r = 0.25; r < 6.0; r += 0.13) {
    EXPECT_NEAR(ks.phi12(r), 0.5 * ks.phi11(r), 1e-12);
  }
  for (double r = 0.01; r < 6.0; r += 0.07) {
    EXPECT_DOUBLE_EQ(ks.phi12(r), ks.phi21(r));
    EXPECT_DOUBLE_EQ(ks.phi11(r), ks.phi22(r));
  }
}

TEST(Presets, LinearRepulsiveCrossCouplingIsLinear) {
  KernelSet ks = preset("linear_repulsive");
  EXPECT_DOUBLE_EQ(ks.phi12(2.0), -8.0);
  EXPECT_DOUBLE_EQ(ks.phi21(0.1), -0.4);
  // Intra-species kernels follow the table above the cut.
  EXPECT_NEAR(ks.phi11(1.0), truth_g3(1.0) + 1.1158 * truth_g0(1.0), 1e-12);
  EXPECT_NEAR(ks.phi22(1.5), truth_g5(1.5) + 1.3 * truth_g0(1.5), 1e-12);
}

TEST(Presets, PredatorPreyShapes) {
  for (const char* name : {"predator_prey_migratory", "predator_prey_ring"}) {
    KernelSet ks = preset(name);
    for (double r = 0.05; r < 4.0; r += 0.11) {
      EXPECT_DOUBLE_EQ(ks.phi22(r), 0.0);
    }
    // Above the cut the power laws apply directly.
    EXPECT_NEAR(ks.phi11(1.0), 0.0, 1e-12);  // r^-2 - 1 at r=1
    EXPECT_LT(ks.phi21(1.0), 0.0);
  }
  EXPECT_NEAR(preset("predator_prey_migratory").phi12(1.0), 3.0, 1e-12);
  EXPECT_NEAR(preset("predator_prey_ring").phi12(1.0), 3.4, 1e-12);
  EXPECT_NEAR(preset("predator_prey_migratory").phi21(1.0), -0.2, 1e-12);
}

TEST(Presets, UnknownNameRejected) {
  EXPECT_THROW(preset("hexagonal"), std::invalid_argument);
}

TEST(Grid, UniformGridCoversRangeInclusive) {
  auto g = uniform_grid(5.0, 11);
  ASSERT_EQ(g.size(), 11u);
  EXPECT_DOUBLE_EQ(g.front(), 0.0);
  EXPECT_DOUBLE_EQ(g.back(), 5.0);
  EXPECT_DOUBLE_EQ(g[1] - g[0], 0.5);
}

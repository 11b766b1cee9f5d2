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
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "swarmgp/common.hpp"
#include "swarmgp/kernels.hpp"

namespace swarmgp {

// O(n) multiplication by a Matérn 3/2 Gram matrix on scalar inputs.
//
// On sorted points the kernel k(t_i, t_j) = s^2 (1 + c|t_i - t_j|) e^{-c|t_i - t_j|}
// (c = sqrt(3)/omega) is semiseparable of rank two, so K w splits into a
// forward and a backward sweep with exponential damping carried between
// consecutive points. All recursion state consists of damped partial sums,
// which avoids the cancellation a naive U V^T factorization would hit for
// large t. Building the object sorts the points once; each multiply is O(n)
// and parameter changes need no rebuild.
class SemiseparableMatern {
 public:
  explicit SemiseparableMatern(const std::vector<double>& points)
      : t_(points.size()), perm_(points.size()) {
    if (points.empty())
      throw std::invalid_argument("SemiseparableMatern: need at least one point");
    std::iota(perm_.begin(), perm_.end(), 0);
    std::sort(perm_.begin(), perm_.end(),
              [&](int a, int b) { return points[a] < points[b]; });
    for (std::size_t i = 0; i < points.size(); ++i) t_[i] = points[perm_[i]];
  }

  int size() const { return static_cast<int>(t_.size()); }

  /// Returns K w in the original (unsorted) index order.
  Vec multiply(const MaternParams& p, const Vec& w) const {
    const int n = size();
    if (w.size() != n)
      throw std::invalid_argument("SemiseparableMatern: size mismatch");
    const double c = std::sqrt(3.0) / p.omega;

    Vec ws(n);
    for (int i = 0; i < n; ++i) ws[i] = w[perm_[i]];

    // Forward sweep: damped sums over j <= i (includes the diagonal).
    //   P_i = sum_{j<=i} e^{-c(t_i-t_j)} w_j
    //   Q_i = sum_{j<=i} (t_i-t_j) e^{-c(t_i-t_j)} w_j
    Vec ys(n);
    double P = ws[0], Q = 0.0;
    ys[0] = P;
    for (int i = 1; i < n; ++i) {
      const double dt = t_[i] - t_[i - 1];
      const double e = std::exp(-c * dt);
      Q = e * (Q + dt * P);
      P = e * P + ws[i];
      ys[i] = P + c * Q;
    }

    // Backward sweep: damped sums over j > i.
    //   R_i = sum_{j>i} e^{-c(t_j-t_i)} w_j
    //   T_i = sum_{j>i} (t_j-t_i) e^{-c(t_j-t_i)} w_j
    double R = 0.0, T = 0.0;
    for (int i = n - 2; i >= 0; --i) {
      const double dt = t_[i + 1] - t_[i];
      const double e = std::exp(-c * dt);
      T = e * (T + dt * (R + ws[i + 1]));
      R = e * (R + ws[i + 1]);
      ys[i] += R + c * T;
    }

    Vec y(n);
    for (int i = 0; i < n; ++i) y[perm_[i]] = p.s2 * ys[i];
    return y;
  }

  /// Sorted copy of the points (ascending).
  const std::vector<double>& sorted_points() const { return t_; }

 private:
  std::vector<double> t_;
  std::vector<int> perm_;
};

}  // namespace swarmgp

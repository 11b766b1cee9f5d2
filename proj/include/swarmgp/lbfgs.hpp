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
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "swarmgp/common.hpp"

namespace swarmgp {

// Limited-memory BFGS with a strong-Wolfe line search (bracket + zoom).
// Deterministic: no randomized restarts, fixed iteration budget, returns the
// best iterate seen rather than the last one.

struct LbfgsOptions {
  int max_iters = 50;
  int memory = 10;
  double c1 = 1e-4;   ///< sufficient-decrease constant
  double c2 = 0.9;    ///< curvature constant
  double grad_tol = 1e-8;
  int max_line_search = 25;
};

struct LbfgsResult {
  Vec x;
  double fx = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;  ///< gradient norm fell below grad_tol
};

/// Minimizes fg(x, grad_out) -> value. The callback must fill grad_out with
/// the gradient at x on every call.
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const Vec&, Vec&)>& fg, Vec x0,
    const LbfgsOptions& opts = {}) {
  const int dim = static_cast<int>(x0.size());
  if (dim == 0) throw std::invalid_argument("lbfgs_minimize: empty start point");

  LbfgsResult res;
  Vec x = std::move(x0);
  Vec g(dim);
  double fx = fg(x, g);
  ++res.evaluations;
  res.x = x;
  res.fx = fx;

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;

  auto eval_line = [&](const Vec& base, const Vec& dir, double t, Vec& gout) {
    ++res.evaluations;
    return fg(base + t * dir, gout);
  };

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (g.norm() < opts.grad_tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion for the search direction.
    Vec q = g;
    std::vector<double> alpha(s_hist.size());
    for (int h = static_cast<int>(s_hist.size()) - 1; h >= 0; --h) {
      alpha[h] = rho_hist[h] * s_hist[h].dot(q);
      q -= alpha[h] * y_hist[h];
    }
    if (!s_hist.empty()) {
      const Vec& s = s_hist.back();
      const Vec& y = y_hist.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      const double beta = rho_hist[h] * y_hist[h].dot(q);
      q += (alpha[h] - beta) * s_hist[h];
    }
    Vec dir = -q;
    double dg0 = g.dot(dir);
    if (!(dg0 < 0.0)) {  // not a descent direction; fall back to steepest descent
      dir = -g;
      dg0 = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    // Strong-Wolfe line search: bracket then zoom.
    const double f0 = fx;
    double t_prev = 0.0, f_prev = f0;
    double t = 1.0;
    double lo = 0.0, hi = 0.0, f_lo = f0;
    bool bracketed = false;
    Vec g_trial(dim);
    double f_trial = f0;
    bool accepted = false;

    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      f_trial = eval_line(x, dir, t, g_trial);
      if (f_trial > f0 + opts.c1 * t * dg0 || (ls > 0 && f_trial >= f_prev)) {
        lo = t_prev;
        f_lo = f_prev;
        hi = t;
        bracketed = true;
        break;
      }
      const double dg = g_trial.dot(dir);
      if (std::abs(dg) <= -opts.c2 * dg0) {
        accepted = true;
        break;
      }
      if (dg >= 0.0) {
        lo = t;
        f_lo = f_trial;
        hi = t_prev;
        bracketed = true;
        break;
      }
      t_prev = t;
      f_prev = f_trial;
      t *= 2.0;
    }

    if (bracketed && !accepted) {
      for (int z = 0; z < opts.max_line_search; ++z) {
        t = 0.5 * (lo + hi);
        f_trial = eval_line(x, dir, t, g_trial);
        if (f_trial > f0 + opts.c1 * t * dg0 || f_trial >= f_lo) {
          hi = t;
        } else {
          const double dg = g_trial.dot(dir);
          if (std::abs(dg) <= -opts.c2 * dg0) {
            accepted = true;
            break;
          }
          if (dg * (hi - lo) >= 0.0) hi = lo;
          lo = t;
          f_lo = f_trial;
        }
        if (std::abs(hi - lo) < 1e-14 * std::max(1.0, std::abs(lo))) break;
      }
    }

    if (!accepted && !(f_trial < f0)) break;  // no usable step; stop early

    const Vec x_new = x + t * dir;
    const Vec s = x_new - x;
    const Vec y = g_trial - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    fx = f_trial;
    g = g_trial;
    res.iterations = iter + 1;
    if (fx < res.fx) {
      res.fx = fx;
      res.x = x;
    }
  }
  return res;
}

}  // namespace swarmgp

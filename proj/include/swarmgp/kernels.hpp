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
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace swarmgp {

// ---------------------------------------------------------------------------
// Matérn covariance, smoothness fixed at nu = 3/2.
// ---------------------------------------------------------------------------

struct MaternParams {
  double s2 = 1.0;     ///< amplitude s^2
  double omega = 1.0;  ///< length-scale

  void validate() const {
    if (!(s2 > 0.0)) throw std::invalid_argument("MaternParams: s2 must be > 0");
    if (!(omega > 0.0)) throw std::invalid_argument("MaternParams: omega must be > 0");
  }
};

/// Matérn 3/2 covariance: s^2 (1 + sqrt(3) h / w) exp(-sqrt(3) h / w), h = |r - r'|.
inline double matern32(const MaternParams& p, double r, double rp) {
  const double a = std::sqrt(3.0) * std::abs(r - rp) / p.omega;
  return p.s2 * (1.0 + a) * std::exp(-a);
}

/// d matern32 / d log(omega). Shares the exponential with the value; callers
/// that need both should use matern32_value_grad.
inline double matern32_dlogomega(const MaternParams& p, double r, double rp) {
  const double a = std::sqrt(3.0) * std::abs(r - rp) / p.omega;
  return p.s2 * a * a * std::exp(-a);
}

/// Value together with partials in log(s^2) and log(omega).
/// d/dlog(s2) is the value itself since the kernel is linear in s^2.
inline void matern32_value_grad(const MaternParams& p, double r, double rp,
                                double& value, double& dlogs2, double& dlogomega) {
  const double a = std::sqrt(3.0) * std::abs(r - rp) / p.omega;
  const double e = std::exp(-a);
  value = p.s2 * (1.0 + a) * e;
  dlogs2 = value;
  dlogomega = p.s2 * a * a * e;
}

// ---------------------------------------------------------------------------
// Radial interaction kernels.
// ---------------------------------------------------------------------------

/// A scalar function of inter-agent distance. `support` is an optional hint
/// for the radius beyond which the function is not meant to be evaluated;
/// nothing enforces it.
struct RadialKernel {
  std::function<double(double)> f;
  std::optional<double> support;
  std::string label;

  double operator()(double r) const { return f(r); }
};

/// The four interaction kernels of a two-species system. phi12 and phi21 are
/// independent; nothing assumes symmetry.
struct KernelSet {
  RadialKernel phi11, phi12, phi21, phi22;

  const RadialKernel& get(int p, int q) const {
    if (p == 1 && q == 1) return phi11;
    if (p == 1 && q == 2) return phi12;
    if (p == 2 && q == 1) return phi21;
    if (p == 2 && q == 2) return phi22;
    throw std::invalid_argument("KernelSet::get: species indices must be 1 or 2");
  }
};

// ---------------------------------------------------------------------------
// Ground-truth building blocks for the benchmark systems.
// ---------------------------------------------------------------------------

inline constexpr double kG0Constant = 0.9357796257;

/// G0(x) = 1 + 2(1-x) + x^(-1/4) - C. Singular as x -> 0+; x must be positive.
inline double truth_g0(double x) {
  if (!(x > 0.0))
    throw std::domain_error("truth_g0: x must be > 0 (x^(-1/4) term)");
  return 1.0 + 2.0 * (1.0 - x) + std::pow(x, -0.25) - kG0Constant;
}

/// G3(x) = 1 + (1-x) + (1-x)^2.
inline double truth_g3(double x) {
  const double u = 1.0 - x;
  return 1.0 + u + u * u;
}

/// G5(x) = (3/2)(1-x)^2 + (1-x)^3 - (1-x)^4.
inline double truth_g5(double x) {
  const double u = 1.0 - x;
  const double u2 = u * u;
  return 1.5 * u2 + u2 * u - u2 * u2;
}

// ---------------------------------------------------------------------------
// Truncation of singular kernels near the origin.
// ---------------------------------------------------------------------------

/// Replace f on [0, r_cut) by a * exp(-b r), with a and b chosen so the value
/// and first derivative match at r_cut. Requires f(r_cut) != 0 (the matching
/// system for (a, b) is singular otherwise). f must be smooth near r_cut; its
/// derivative there is taken by a five-point central difference.
inline RadialKernel truncate_singular(const RadialKernel& f, double r_cut) {
  if (!(r_cut > 0.0))
    throw std::invalid_argument("truncate_singular: r_cut must be > 0");
  const double fc = f(r_cut);
  if (fc == 0.0 || !std::isfinite(fc))
    throw std::invalid_argument(
        "truncate_singular: f(r_cut) must be finite and nonzero, got " +
        std::to_string(fc));

  const double h = 1e-5 * std::max(1.0, r_cut);
  const double fd = (f(r_cut - 2 * h) - 8.0 * f(r_cut - h) + 8.0 * f(r_cut + h) -
                     f(r_cut + 2 * h)) /
                    (12.0 * h);
  const double b = -fd / fc;
  if (!std::isfinite(b))
    throw std::invalid_argument("truncate_singular: derivative match is not finite");
  const double a = fc * std::exp(b * r_cut);

  auto inner = f.f;
  return RadialKernel{
      [inner, r_cut, a, b](double r) {
        return r < r_cut ? a * std::exp(-b * r) : inner(r);
      },
      f.support, f.label + " [exp-matched below r=" + std::to_string(r_cut) + "]"};
}

// ---------------------------------------------------------------------------
// Benchmark kernel sets.
// ---------------------------------------------------------------------------

/// Repulsive aggregation system: every kernel is a scaled G0(r^2/2), all four
/// truncated below r = 0.25.
inline KernelSet preset_repulsive() {
  auto g = [](double r) { return truth_g0(0.5 * r * r); };
  auto gh = [](double r) { return 0.5 * truth_g0(0.5 * r * r); };
  const double rc = 0.25;
  return KernelSet{
      truncate_singular({g, std::nullopt, "G0(r^2/2)"}, rc),
      truncate_singular({gh, std::nullopt, "G0(r^2/2)/2"}, rc),
      truncate_singular({gh, std::nullopt, "G0(r^2/2)/2"}, rc),
      truncate_singular({g, std::nullopt, "G0(r^2/2)"}, rc),
  };
}

/// Linear-repulsive system: polynomial intra-species kernels with a G0(r)
/// singular part (truncated below r = 0.5) and linear cross-species coupling.
inline KernelSet preset_linear_repulsive() {
  auto p11 = [](double r) { return truth_g3(r) + 1.1158 * truth_g0(r); };
  auto p22 = [](double r) { return truth_g5(r) + 1.3 * truth_g0(r); };
  auto lin = [](double r) { return -4.0 * r; };
  const double rc = 0.5;
  return KernelSet{
      truncate_singular({p11, std::nullopt, "G3(r) + 1.1158 G0(r)"}, rc),
      RadialKernel{lin, std::nullopt, "-4r"},
      RadialKernel{lin, std::nullopt, "-4r"},
      truncate_singular({p22, std::nullopt, "G5(r) + 1.3 G0(r)"}, rc),
  };
}

/// Predator-prey family: prey attract each other (phi11), prey flee predators
/// (phi12), predators chase prey (phi21), predators ignore each other.
/// Singular kernels truncated below r = 0.5; signs applied before truncation.
inline KernelSet preset_predator_prey(double a, double b, double c, double p) {
  auto p11 = [a](double r) { return 1.0 / (r * r) - a; };
  auto p12 = [b](double r) { return b / (r * r); };
  auto p21 = [c, p](double r) { return -c * std::pow(r, -p); };
  const double rc = 0.5;
  return KernelSet{
      truncate_singular({p11, std::nullopt, "r^-2 - a"}, rc),
      truncate_singular({p12, std::nullopt, "b r^-2"}, rc),
      truncate_singular({p21, std::nullopt, "-c r^-p"}, rc),
      RadialKernel{[](double) { return 0.0; }, std::nullopt, "0"},
  };
}

inline KernelSet preset_predator_prey_migratory() {
  return preset_predator_prey(1.0, 3.0, 0.2, 2.5);
}

inline KernelSet preset_predator_prey_ring() {
  return preset_predator_prey(1.0, 3.4, 0.9, 2.5);
}

/// Look up a benchmark system by name.
inline KernelSet preset(const std::string& name) {
  if (name == "repulsive") return preset_repulsive();
  if (name == "linear_repulsive") return preset_linear_repulsive();
  if (name == "predator_prey_migratory") return preset_predator_prey_migratory();
  if (name == "predator_prey_ring") return preset_predator_prey_ring();
  throw std::invalid_argument("preset: unknown kernel set '" + name + "'");
}

/// Evaluate a kernel on a grid; pairs up with the CSV writers in io.hpp.
inline std::vector<std::pair<double, double>> sample_curve(
    const RadialKernel& k, const std::vector<double>& grid) {
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double r : grid) out.emplace_back(r, k(r));
  return out;
}

/// n equally spaced points from 0 to R inclusive.
inline std::vector<double> uniform_grid(double R, int n) {
  if (n < 2) throw std::invalid_argument("uniform_grid: need at least 2 points");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = R * static_cast<double>(i) / (n - 1);
  return g;
}

/// Wraps tabulated kernel values into a callable: linear interpolation on the
/// grid, clamped to the end values outside it. This is how estimated kernels
/// are fed back into the integrator.
inline RadialKernel interpolated_kernel(std::vector<double> grid,
                                        std::vector<double> values,
                                        std::string label = "interpolated") {
  if (grid.size() != values.size() || grid.size() < 2)
    throw std::invalid_argument("interpolated_kernel: need matching grids, >= 2 points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw std::invalid_argument("interpolated_kernel: grid must increase");
  auto f = [g = std::move(grid), v = std::move(values)](double r) {
    if (r <= g.front()) return v.front();
    if (r >= g.back()) return v.back();
    const auto it = std::upper_bound(g.begin(), g.end(), r);
    const std::size_t j = static_cast<std::size_t>(it - g.begin());
    const double w = (r - g[j - 1]) / (g[j] - g[j - 1]);
    return (1.0 - w) * v[j - 1] + w * v[j];
  };
  return RadialKernel{f, std::nullopt, std::move(label)};
}

}  // namespace swarmgp

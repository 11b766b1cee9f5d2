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
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace swarmgp {

inline constexpr const char* kVersion = "0.1.0";

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Two-species population layout. Agents 0..n1-1 are type 1, n1..n-1 are type 2.
struct SpeciesConfig {
  int n1 = 0;
  int n2 = 0;
  int dim = 0;

  int n() const { return n1 + n2; }
  int type_of(int agent) const { return agent < n1 ? 1 : 2; }

  void validate() const {
    if (n1 < 1) throw std::invalid_argument("SpeciesConfig: n1 must be >= 1");
    if (n2 < 1) throw std::invalid_argument("SpeciesConfig: n2 must be >= 1");
    if (dim < 1) throw std::invalid_argument("SpeciesConfig: dim must be >= 1");
  }
};

// splitmix64 finalizer (Vigna). Used to decorrelate derived stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for an auxiliary stream. Streams with distinct (purpose, index) pairs
/// are independent for all practical purposes; the scheme is fixed so every
/// run of the same master seed replays the same randomness.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t purpose,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ (purpose * 0x9e3779b97f4a7c15ULL)) + index);
}

/// Seedable generator with explicit variate transforms.
///
/// The engine is std::mt19937_64 (bit-exact by the C++ standard); uniforms and
/// normals are produced by fixed transforms rather than std distributions,
/// whose output is implementation-defined. Normals use Box-Muller and consume
/// exactly two engine draws per pair.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  /// Uniform on [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0,1] so the log is finite.
    const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * M_PI * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace swarmgp

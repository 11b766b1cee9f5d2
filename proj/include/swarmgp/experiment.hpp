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

// Experiment layer: JSON config, deterministic trial protocol, and the five
// CLI commands. Everything is a function of (config, master seed), so a rerun
// reproduces every artifact byte for byte.
//
// Seed discipline: trial t trains on generate_dataset(seed + t, ...); the
// evaluation ensemble and held-out initial conditions draw from dedicated
// substreams so changing the trial count never shifts them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "swarmgp/common.hpp"
#include "swarmgp/dynamics.hpp"
#include "swarmgp/gp.hpp"
#include "swarmgp/io.hpp"
#include "swarmgp/kernels.hpp"
#include "swarmgp/measures.hpp"
#include "swarmgp/svg.hpp"

namespace swarmgp {

/// Raised for any defect in the experiment configuration; the CLI maps it to
/// exit code 2, everything else to 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline constexpr std::uint64_t kStreamEval = 0x3f7;
inline constexpr std::uint64_t kStreamTestIc = 0x4a9;
inline constexpr std::uint64_t kStreamTransferIc = 0x5b3;
}  // namespace detail

struct SweepSpec {
  std::string parameter;  ///< "sigma" or "num_traj"
  std::vector<double> values;
};

struct TransferSpec {
  std::vector<int> sizes;  ///< target counts for species 1; species 2 scales along
};

struct ExperimentConfig {
  std::string preset;
  int n1 = 0;
  int n2 = 0;
  int dim = 2;
  int num_trajectories = 0;
  int num_observations = 0;
  double horizon = 0.0;
  double sigma = 0.0;
  int trials = 10;
  bool optimize_hyperparameters = false;
  int optimize_iterations = 50;
  int eval_trajectories = 2000;
  int grid_points = 1000;
  int dt_substeps = 10;
  std::optional<SweepSpec> sweep;
  std::optional<TransferSpec> transfer;

  SpeciesConfig species() const { return SpeciesConfig{n1, n2, dim}; }
};

/// Parses and validates a config file. Unknown keys are rejected rather than
/// ignored so a typo cannot silently fall back to a default. On success the
/// canonical (key-sorted, whitespace-free) JSON text is handed back for the
/// manifest hash.
inline ExperimentConfig load_config(const std::string& path,
                                    std::string* canonical_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  static const std::set<std::string> kKeys = {
      "preset",          "n1",
      "n2",              "dim",
      "num_trajectories", "num_observations",
      "horizon",         "sigma",
      "trials",          "optimize_hyperparameters",
      "optimize_iterations", "eval_trajectories",
      "grid_points",     "dt_substeps",
      "sweep",           "transfer"};
  for (const auto& item : j.items())
    if (!kKeys.count(item.key()))
      throw ConfigError("unknown config key '" + item.key() + "'");

  auto as_int = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer())
      throw ConfigError("config key '" + key + "' must be an integer");
    const std::int64_t x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() ||
        x > std::numeric_limits<int>::max())
      throw ConfigError("config key '" + key + "' is out of range");
    return static_cast<int>(x);
  };
  auto as_double = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number())
      throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
  };
  auto as_bool = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_boolean())
      throw ConfigError("config key '" + key + "' must be a boolean");
    return v.get<bool>();
  };
  auto as_string = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_string())
      throw ConfigError("config key '" + key + "' must be a string");
    return v.get<std::string>();
  };
  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key))
      throw ConfigError(std::string("missing required config key '") + key +
                        "'");
    return j.at(key);
  };

  ExperimentConfig c;
  c.preset = as_string(require("preset"), "preset");
  c.n1 = as_int(require("n1"), "n1");
  c.n2 = as_int(require("n2"), "n2");
  c.num_trajectories = as_int(require("num_trajectories"), "num_trajectories");
  c.num_observations = as_int(require("num_observations"), "num_observations");
  c.horizon = as_double(require("horizon"), "horizon");
  c.sigma = as_double(require("sigma"), "sigma");
  if (j.contains("dim")) c.dim = as_int(j.at("dim"), "dim");
  if (j.contains("trials")) c.trials = as_int(j.at("trials"), "trials");
  if (j.contains("optimize_hyperparameters"))
    c.optimize_hyperparameters =
        as_bool(j.at("optimize_hyperparameters"), "optimize_hyperparameters");
  if (j.contains("optimize_iterations"))
    c.optimize_iterations = as_int(j.at("optimize_iterations"), "optimize_iterations");
  if (j.contains("eval_trajectories"))
    c.eval_trajectories = as_int(j.at("eval_trajectories"), "eval_trajectories");
  if (j.contains("grid_points"))
    c.grid_points = as_int(j.at("grid_points"), "grid_points");
  if (j.contains("dt_substeps"))
    c.dt_substeps = as_int(j.at("dt_substeps"), "dt_substeps");

  try {
    (void)preset(c.preset);
  } catch (const std::invalid_argument&) {
    throw ConfigError("unknown preset '" + c.preset + "'");
  }
  if (c.n1 < 1 || c.n2 < 1)
    throw ConfigError("n1 and n2 must each be at least 1");
  if (c.dim < 1) throw ConfigError("dim must be at least 1");
  if (c.num_trajectories < 1)
    throw ConfigError("num_trajectories must be at least 1");
  if (c.num_observations < 1)
    throw ConfigError("num_observations must be at least 1");
  if (!(c.horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (c.sigma < 0.0) throw ConfigError("sigma must be nonnegative");
  if (c.trials < 1) throw ConfigError("trials must be at least 1");
  if (c.optimize_iterations < 1)
    throw ConfigError("optimize_iterations must be at least 1");
  if (c.eval_trajectories < 1)
    throw ConfigError("eval_trajectories must be at least 1");
  if (c.grid_points < 2) throw ConfigError("grid_points must be at least 2");
  if (c.dt_substeps < 1) throw ConfigError("dt_substeps must be at least 1");

  if (j.contains("sweep")) {
    const nlohmann::json& s = j.at("sweep");
    if (!s.is_object()) throw ConfigError("'sweep' must be an object");
    for (const auto& item : s.items())
      if (item.key() != "parameter" && item.key() != "values")
        throw ConfigError("unknown sweep key '" + item.key() + "'");
    if (!s.contains("parameter") || !s.contains("values"))
      throw ConfigError("sweep needs 'parameter' and 'values'");
    SweepSpec spec;
    spec.parameter = as_string(s.at("parameter"), "sweep.parameter");
    if (spec.parameter != "sigma" && spec.parameter != "num_traj")
      throw ConfigError("sweep.parameter must be 'sigma' or 'num_traj'");
    const nlohmann::json& vals = s.at("values");
    if (!vals.is_array() || vals.empty())
      throw ConfigError("sweep.values must be a nonempty array");
    for (const nlohmann::json& v : vals) {
      const double x = as_double(v, "sweep.values");
      if (spec.parameter == "sigma" && x < 0.0)
        throw ConfigError("sweep.values: sigma values must be nonnegative");
      if (spec.parameter == "num_traj" &&
          (x < 1.0 || x != std::floor(x) || x > 1e9))
        throw ConfigError("sweep.values: num_traj values must be positive integers");
      spec.values.push_back(x);
    }
    c.sweep = std::move(spec);
  }

  if (j.contains("transfer")) {
    const nlohmann::json& t = j.at("transfer");
    if (!t.is_object()) throw ConfigError("'transfer' must be an object");
    for (const auto& item : t.items())
      if (item.key() != "sizes")
        throw ConfigError("unknown transfer key '" + item.key() + "'");
    if (!t.contains("sizes")) throw ConfigError("transfer needs 'sizes'");
    const nlohmann::json& sizes = t.at("sizes");
    if (!sizes.is_array() || sizes.empty())
      throw ConfigError("transfer.sizes must be a nonempty array");
    TransferSpec spec;
    for (const nlohmann::json& v : sizes) {
      const int s = as_int(v, "transfer.sizes");
      if (s < 1) throw ConfigError("transfer.sizes entries must be at least 1");
      spec.sizes.push_back(s);
    }
    c.transfer = std::move(spec);
  }

  if (canonical_out) *canonical_out = j.dump();
  return c;
}

// ---------------------------------------------------------------------------
// Shared building blocks
// ---------------------------------------------------------------------------

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation, 0 for a single value
};

inline Stats stats(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return s;
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return std::string(buf);
}

inline bool component_has_pairs(const SpeciesConfig& sc, int p, int q) {
  const int np = p == 1 ? sc.n1 : sc.n2;
  return p == q ? np >= 2 : true;
}

/// A fitted estimator behind either solver. Small problems get the dense
/// Cholesky model (exact, with posterior variance); anything past the dense
/// cap falls back to conjugate gradients on the structured matvec, which
/// yields the posterior mean only.
struct Estimator {
  std::shared_ptr<const GpTrainData> data;
  GpHyperparams hyper;
  std::optional<GpModel> dense;
  std::optional<GpMeanModel> iterative;
  double nlml_value = std::numeric_limits<double>::quiet_NaN();
  int opt_iterations = 0;

  bool has_variance() const { return dense.has_value(); }
  const Vec& gamma() const { return dense ? dense->gamma : iterative->gamma; }

  PosteriorCurve curve(int p, int q, const std::vector<double>& grid,
                       bool with_variance) const {
    if (dense) return posterior_curve(*dense, p, q, grid, with_variance);
    PosteriorCurve c;
    c.mean = posterior_mean_curve(*iterative, p, q, grid);
    return c;
  }
};

inline Estimator fit_estimator(const TrajectoryDataset& ds,
                               const ExperimentConfig& cfg) {
  auto data = std::make_shared<GpTrainData>(flatten_dataset(ds));
  Estimator est;
  est.data = data;
  est.hyper = default_hyperparams(*data, ds.sigma);
  const FitOptions fopts;
  const bool dense_ok = data->rows() <= fopts.dense_cap;
  if (cfg.optimize_hyperparameters) {
    if (!dense_ok)
      throw ConfigError(
          "hyperparameter optimization needs the dense solver; this dataset "
          "has " +
          std::to_string(data->rows()) + " rows, cap " +
          std::to_string(fopts.dense_cap));
    OptimizeOptions oo;
    oo.iterations = cfg.optimize_iterations;
    const OptimizeResult res = optimize_hyperparams(*data, est.hyper, oo);
    est.hyper = res.hyper;
    est.nlml_value = res.nlml;
    est.opt_iterations = res.iterations;
  }
  if (dense_ok) {
    est.dense = fit(data, est.hyper, fopts);
  } else {
    est.iterative = fit_mean_cg(data, est.hyper);
    if (!est.iterative->solve_info.converged)
      throw std::runtime_error(
          "conjugate gradient solve did not converge (relative residual " +
          sci(est.iterative->solve_info.rel_residual) + ")");
  }
  return est;
}

/// Wraps grid samples of the four estimated kernels into callables the
/// integrator accepts.
inline KernelSet kernels_from_curves(const std::vector<double>& grid,
                                     const std::array<Vec, 4>& means) {
  auto mk = [&](int idx, const char* label) {
    std::vector<double> v(means[static_cast<std::size_t>(idx)].data(),
                          means[static_cast<std::size_t>(idx)].data() +
                              means[static_cast<std::size_t>(idx)].size());
    return interpolated_kernel(grid, std::move(v), label);
  };
  return KernelSet{mk(0, "phi11 estimate"), mk(1, "phi12 estimate"),
                   mk(2, "phi21 estimate"), mk(3, "phi22 estimate")};
}

/// 199 equally spaced prediction times from 0 to t_end. With t_end twice the
/// training horizon, index 99 lands exactly on the horizon, splitting the
/// grid into a seen interval [0, T] and an extrapolated one [T, 2T] that
/// share the boundary point.
inline std::vector<double> prediction_times(double t_end) {
  std::vector<double> t(199);
  for (int k = 0; k < 199; ++k)
    t[static_cast<std::size_t>(k)] = t_end * k / 198.0;
  return t;
}

/// Evaluation context shared by every trial: ground truth, the distance grid,
/// and occupancy-weighted pair-distance measures from a large noise-free
/// ensemble of the true dynamics. Seeded independently of the trials so the
/// weighting never depends on the trial count.
struct EvalContext {
  SpeciesConfig sc;
  KernelSet truth;
  double radius = 0.0;
  std::vector<double> grid;
  std::array<std::optional<EmpiricalMeasure>, 4> measures;
};

inline EvalContext make_eval_context(const ExperimentConfig& cfg,
                                     std::uint64_t seed) {
  EvalContext ctx;
  ctx.sc = cfg.species();
  ctx.truth = preset(cfg.preset);
  const TrajectoryDataset ens = generate_dataset(
      ctx.sc, ctx.truth, cfg.eval_trajectories, cfg.num_observations,
      cfg.horizon, 0.0, stream_seed(seed, detail::kStreamEval, 0),
      cfg.dt_substeps);
  ctx.radius = max_pair_distance(ens);
  ctx.grid = uniform_grid(ctx.radius, cfg.grid_points);
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q)
      if (component_has_pairs(ctx.sc, p, q))
        ctx.measures[static_cast<std::size_t>(2 * (p - 1) + (q - 1))] =
            empirical_measure(ens, p, q, ctx.radius, cfg.grid_points);
  return ctx;
}

/// One full trial: simulate training data, fit, score the four kernels
/// against the truth, then integrate the learned system from a training
/// initial condition and a held-out one across twice the training horizon.
struct TrialOutput {
  Estimator est;
  std::array<PosteriorCurve, 4> curves;
  std::array<std::optional<KernelError>, 4> errors;
  Trajectory truth_train, pred_train, truth_test, pred_test;
  double err_train_first = 0.0, err_train_second = 0.0;
  double err_test_first = 0.0, err_test_second = 0.0;
};

inline TrialOutput run_trial(const ExperimentConfig& cfg,
                             const EvalContext& ctx, std::uint64_t trial_seed,
                             bool with_variance) {
  TrialOutput out;
  const TrajectoryDataset train_ds = generate_dataset(
      ctx.sc, ctx.truth, cfg.num_trajectories, cfg.num_observations,
      cfg.horizon, cfg.sigma, trial_seed, cfg.dt_substeps);
  out.est = fit_estimator(train_ds, cfg);

  std::array<Vec, 4> means;
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) {
      const std::size_t idx = static_cast<std::size_t>(2 * (p - 1) + (q - 1));
      out.curves[idx] = out.est.curve(p, q, ctx.grid, with_variance);
      means[idx] = out.curves[idx].mean;
      if (ctx.measures[idx])
        out.errors[idx] =
            kernel_error(ctx.truth.get(p, q), means[idx], *ctx.measures[idx]);
    }

  const KernelSet learned = kernels_from_curves(ctx.grid, means);
  const std::vector<double> times = prediction_times(2.0 * cfg.horizon);
  const double dt = (times[1] - times[0]) / cfg.dt_substeps;
  const Mat x0_train = train_ds.trajectories[0].x[0];
  Rng ic(stream_seed(trial_seed, detail::kStreamTestIc, 0));
  const Mat x0_test = sample_initial(ctx.sc, ic);

  out.truth_train = predict_trajectory(ctx.sc, ctx.truth, x0_train, times, dt);
  out.pred_train = predict_trajectory(ctx.sc, learned, x0_train, times, dt);
  out.truth_test = predict_trajectory(ctx.sc, ctx.truth, x0_test, times, dt);
  out.pred_test = predict_trajectory(ctx.sc, learned, x0_test, times, dt);

  // Index 99 is the training horizon; both intervals include it.
  out.err_train_first = trajectory_error(out.truth_train, out.pred_train, 0, 100);
  out.err_train_second = trajectory_error(out.truth_train, out.pred_train, 99, 199);
  out.err_test_first = trajectory_error(out.truth_test, out.pred_test, 0, 100);
  out.err_test_second = trajectory_error(out.truth_test, out.pred_test, 99, 199);
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace detail {

inline Vec clamped_stddev(const PosteriorCurve& c) {
  if (c.var.size() == 0) return Vec();
  return c.var.cwiseMax(0.0).cwiseSqrt();
}

inline std::string component_name(int p, int q) {
  return std::to_string(p) + std::to_string(q);
}

}  // namespace detail

inline int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                        const std::string& out_dir) {
  std::string canonical;
  const ExperimentConfig cfg = load_config(config_path, &canonical);
  const std::filesystem::path out(out_dir);
  std::vector<std::string> written;

  const TrajectoryDataset ds = generate_dataset(
      cfg.species(), preset(cfg.preset), cfg.num_trajectories,
      cfg.num_observations, cfg.horizon, cfg.sigma, seed, cfg.dt_substeps);
  save_dataset_csv(out / "dataset.csv", ds);
  written.push_back("dataset.csv");

  const int rows = cfg.num_trajectories * cfg.num_observations *
                   cfg.species().n();
  std::cout << "simulate: " << cfg.num_trajectories << " trajectories, "
            << cfg.num_observations << " observations each, " << rows
            << " dataset rows -> " << (out / "dataset.csv").string() << "\n";
  save_manifest(out / "manifest.json", "simulate", seed, canonical, written);
  return 0;
}

inline int cmd_train(const std::string& config_path, std::uint64_t seed,
                     const std::string& out_dir) {
  std::string canonical;
  const ExperimentConfig cfg = load_config(config_path, &canonical);
  const std::filesystem::path out(out_dir);
  std::vector<std::string> written;

  const SpeciesConfig sc = cfg.species();
  const KernelSet truth = preset(cfg.preset);
  const TrajectoryDataset ds =
      generate_dataset(sc, truth, cfg.num_trajectories, cfg.num_observations,
                       cfg.horizon, cfg.sigma, seed, cfg.dt_substeps);
  Estimator est = fit_estimator(ds, cfg);
  if (std::isnan(est.nlml_value) && est.dense)
    est.nlml_value = nlml(*est.data, est.hyper);

  const double radius = max_pair_distance(ds);
  const std::vector<double> grid = uniform_grid(radius, cfg.grid_points);

  std::array<AtomExpansion, 4> expansions;
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) {
      const std::size_t idx = static_cast<std::size_t>(2 * (p - 1) + (q - 1));
      expansions[idx] = atom_expansion(*est.data, est.gamma(), p, q);
      const PosteriorCurve c = est.curve(p, q, grid, est.has_variance());
      Vec truth_v(static_cast<Eigen::Index>(grid.size()));
      for (std::size_t g = 0; g < grid.size(); ++g)
        truth_v[static_cast<Eigen::Index>(g)] = truth.get(p, q)(grid[g]);
      const std::string name = detail::component_name(p, q);
      save_curve_csv(out / ("curves_" + name + ".csv"), grid, truth_v, c.mean,
                     detail::clamped_stddev(c));
      written.push_back("curves_" + name + ".csv");
      std::optional<EmpiricalMeasure> measure;
      if (component_has_pairs(sc, p, q))
        measure = empirical_measure(ds, p, q, radius, cfg.grid_points);
      save_kernel_plot_svg(out / ("kernel_" + name + ".svg"), grid, truth_v,
                           c.mean, detail::clamped_stddev(c),
                           measure ? &*measure : nullptr, "phi" + name);
      written.push_back("kernel_" + name + ".svg");
    }
  save_coefficients_csv(out / "coefficients.csv", expansions);
  written.push_back("coefficients.csv");
  save_hyperparams_txt(out / "hyperparams.txt", est.hyper, est.nlml_value,
                       est.opt_iterations);
  written.push_back("hyperparams.txt");

  std::cout << "train: " << est.data->rows() << " rows, "
            << (est.has_variance() ? "dense solver" : "iterative solver")
            << ", nlml " << sci(est.nlml_value) << "\n";
  save_manifest(out / "manifest.json", "train", seed, canonical, written);
  return 0;
}

inline int cmd_evaluate(const std::string& config_path, std::uint64_t seed,
                        const std::string& out_dir) {
  std::string canonical;
  const ExperimentConfig cfg = load_config(config_path, &canonical);
  const std::filesystem::path out(out_dir);
  std::vector<std::string> written;

  const EvalContext ctx = make_eval_context(cfg, seed);
  std::cout << "evaluate: radius " << sci(ctx.radius) << " from "
            << cfg.eval_trajectories << " ensemble trajectories\n";

  std::vector<KernelErrorRow> kernel_rows;
  std::vector<TrajErrorRow> traj_rows;
  std::array<std::vector<double>, 4> l2_by_comp, linf_by_comp;
  std::array<std::vector<double>, 4> traj_by_kind;  // train/test x first/second
  std::ofstream hyper_csv = open_out(out / "trials_hyperparams.csv");
  written.push_back("trials_hyperparams.csv");
  hyper_csv << "trial,s2_11,omega_11,s2_12,omega_12,s2_21,omega_21,s2_22,"
               "omega_22,sigma2,opt_iterations\n";

  for (int t = 0; t < cfg.trials; ++t) {
    const TrialOutput trial = run_trial(cfg, ctx, seed + static_cast<std::uint64_t>(t), t == 0);

    hyper_csv << t;
    for (int p = 1; p <= 2; ++p)
      for (int q = 1; q <= 2; ++q)
        hyper_csv << ',' << fmt_double(trial.est.hyper.theta(p, q).s2) << ','
                  << fmt_double(trial.est.hyper.theta(p, q).omega);
    hyper_csv << ',' << fmt_double(trial.est.hyper.sigma2) << ','
              << trial.est.opt_iterations << "\n";

    std::cout << "trial " << t << ":";
    for (int p = 1; p <= 2; ++p)
      for (int q = 1; q <= 2; ++q) {
        const std::size_t idx = static_cast<std::size_t>(2 * (p - 1) + (q - 1));
        if (!trial.errors[idx]) continue;
        kernel_rows.push_back({t, p, q, *trial.errors[idx]});
        l2_by_comp[idx].push_back(trial.errors[idx]->l2rho);
        linf_by_comp[idx].push_back(trial.errors[idx]->linf);
        std::cout << " l2[" << detail::component_name(p, q)
                  << "]=" << sci(trial.errors[idx]->l2rho);
      }
    std::cout << " traj_test=" << sci(trial.err_test_first) << "\n";

    traj_rows.push_back({t, "train", "first", trial.err_train_first});
    traj_rows.push_back({t, "train", "second", trial.err_train_second});
    traj_rows.push_back({t, "test", "first", trial.err_test_first});
    traj_rows.push_back({t, "test", "second", trial.err_test_second});
    traj_by_kind[0].push_back(trial.err_train_first);
    traj_by_kind[1].push_back(trial.err_train_second);
    traj_by_kind[2].push_back(trial.err_test_first);
    traj_by_kind[3].push_back(trial.err_test_second);

    if (t == 0) {
      for (int p = 1; p <= 2; ++p)
        for (int q = 1; q <= 2; ++q) {
          const std::size_t idx =
              static_cast<std::size_t>(2 * (p - 1) + (q - 1));
          const std::string name = detail::component_name(p, q);
          Vec truth_v(static_cast<Eigen::Index>(ctx.grid.size()));
          for (std::size_t g = 0; g < ctx.grid.size(); ++g)
            truth_v[static_cast<Eigen::Index>(g)] =
                ctx.truth.get(p, q)(ctx.grid[g]);
          save_curve_csv(out / "trial_00" / ("curves_" + name + ".csv"),
                         ctx.grid, truth_v, trial.curves[idx].mean,
                         detail::clamped_stddev(trial.curves[idx]));
          written.push_back("trial_00/curves_" + name + ".csv");
          const auto& m = ctx.measures[idx];
          save_kernel_plot_svg(out / ("kernel_" + name + ".svg"), ctx.grid,
                               truth_v, trial.curves[idx].mean,
                               detail::clamped_stddev(trial.curves[idx]),
                               m ? &*m : nullptr, "phi" + name);
          written.push_back("kernel_" + name + ".svg");
        }
      if (cfg.dim >= 2) {
        save_trajectory_plot_svg(out / "trajectory_train.svg", ctx.sc,
                                 trial.truth_train, trial.pred_train,
                                 cfg.horizon, "training initial condition");
        save_trajectory_plot_svg(out / "trajectory_test.svg", ctx.sc,
                                 trial.truth_test, trial.pred_test,
                                 cfg.horizon, "held-out initial condition");
        written.push_back("trajectory_train.svg");
        written.push_back("trajectory_test.svg");
      }
    }
  }
  hyper_csv.close();

  save_kernel_errors_csv(out / "kernel_errors.csv", kernel_rows);
  written.push_back("kernel_errors.csv");
  save_traj_errors_csv(out / "traj_errors.csv", traj_rows);
  written.push_back("traj_errors.csv");

  {
    std::ofstream s = open_out(out / "kernel_errors_summary.csv");
    written.push_back("kernel_errors_summary.csv");
    s << "component,l2rho_mean,l2rho_std,linf_mean,linf_std,absolute\n";
    for (int p = 1; p <= 2; ++p)
      for (int q = 1; q <= 2; ++q) {
        const std::size_t idx = static_cast<std::size_t>(2 * (p - 1) + (q - 1));
        if (l2_by_comp[idx].empty()) continue;
        const Stats l2 = stats(l2_by_comp[idx]);
        const Stats li = stats(linf_by_comp[idx]);
        int absolute = 0;
        for (const KernelErrorRow& r : kernel_rows)
          if (r.p == p && r.q == q) absolute = r.error.absolute ? 1 : 0;
        s << detail::component_name(p, q) << ',' << fmt_double(l2.mean) << ','
          << fmt_double(l2.stddev) << ',' << fmt_double(li.mean) << ','
          << fmt_double(li.stddev) << ',' << absolute << "\n";
        std::cout << "summary phi" << detail::component_name(p, q)
                  << ": l2rho " << sci(l2.mean) << " +- " << sci(l2.stddev)
                  << ", linf " << sci(li.mean) << "\n";
      }
  }
  {
    std::ofstream s = open_out(out / "traj_errors_summary.csv");
    written.push_back("traj_errors_summary.csv");
    s << "split,interval,mean,std\n";
    const char* kind_split[4] = {"train", "train", "test", "test"};
    const char* kind_interval[4] = {"first", "second", "first", "second"};
    for (int k = 0; k < 4; ++k) {
      const Stats st = stats(traj_by_kind[static_cast<std::size_t>(k)]);
      s << kind_split[k] << ',' << kind_interval[k] << ','
        << fmt_double(st.mean) << ',' << fmt_double(st.stddev) << "\n";
      std::cout << "summary traj " << kind_split[k] << ' ' << kind_interval[k]
                << ": " << sci(st.mean) << " +- " << sci(st.stddev) << "\n";
    }
  }

  save_manifest(out / "manifest.json", "evaluate", seed, canonical, written);
  return 0;
}

inline int cmd_sweep(const std::string& config_path, std::uint64_t seed,
                     const std::string& out_dir, bool force) {
  std::string canonical;
  const ExperimentConfig cfg = load_config(config_path, &canonical);
  if (!cfg.sweep) throw ConfigError("sweep command needs a 'sweep' section");
  const SweepSpec& spec = *cfg.sweep;
  const std::filesystem::path out(out_dir);
  std::vector<std::string> written;

  // Refuse runaway points (the iterative solver is linear in rows but trials
  // multiply); --force overrides for users who accept the wait.
  constexpr int kRowCeiling = 64000;

  const EvalContext ctx = make_eval_context(cfg, seed);

  struct SweepRow {
    double value;
    int trial, p, q;
    KernelError error;
  };
  std::vector<SweepRow> rows;
  // mean l2rho per (value, component), in value order
  std::array<std::vector<double>, 4> mean_by_comp;
  std::array<std::vector<double>, 4> std_by_comp, linf_mean_by_comp;

  for (double value : spec.values) {
    ExperimentConfig point = cfg;
    if (spec.parameter == "sigma")
      point.sigma = value;
    else
      point.num_trajectories = static_cast<int>(std::lround(value));
    const int prows = point.num_trajectories * point.num_observations *
                      ctx.sc.dim * ctx.sc.n();
    if (prows > kRowCeiling && !force)
      throw ConfigError("sweep point " + spec.parameter + "=" + sci(value) +
                        " needs " + std::to_string(prows) +
                        " rows, over the ceiling " +
                        std::to_string(kRowCeiling) +
                        "; rerun with --force to accept the cost");

    std::array<std::vector<double>, 4> l2s, linfs;
    for (int t = 0; t < cfg.trials; ++t) {
      const TrajectoryDataset ds = generate_dataset(
          ctx.sc, ctx.truth, point.num_trajectories, point.num_observations,
          point.horizon, point.sigma, seed + static_cast<std::uint64_t>(t),
          point.dt_substeps);
      const Estimator est = fit_estimator(ds, point);
      for (int p = 1; p <= 2; ++p)
        for (int q = 1; q <= 2; ++q) {
          const std::size_t idx =
              static_cast<std::size_t>(2 * (p - 1) + (q - 1));
          if (!ctx.measures[idx]) continue;
          const PosteriorCurve c = est.curve(p, q, ctx.grid, false);
          const KernelError err =
              kernel_error(ctx.truth.get(p, q), c.mean, *ctx.measures[idx]);
          rows.push_back({value, t, p, q, err});
          l2s[idx].push_back(err.l2rho);
          linfs[idx].push_back(err.linf);
        }
    }
    std::cout << "sweep " << spec.parameter << "=" << sci(value) << ":";
    for (int p = 1; p <= 2; ++p)
      for (int q = 1; q <= 2; ++q) {
        const std::size_t idx = static_cast<std::size_t>(2 * (p - 1) + (q - 1));
        if (l2s[idx].empty()) continue;
        const Stats st = stats(l2s[idx]);
        mean_by_comp[idx].push_back(st.mean);
        std_by_comp[idx].push_back(st.stddev);
        linf_mean_by_comp[idx].push_back(stats(linfs[idx]).mean);
        std::cout << " l2[" << detail::component_name(p, q)
                  << "]=" << sci(st.mean);
      }
    std::cout << "\n";
  }

  {
    std::ofstream s = open_out(out / "sweep.csv");
    written.push_back("sweep.csv");
    s << "parameter,value,trial,component,linf,l2rho,absolute\n";
    for (const SweepRow& r : rows)
      s << spec.parameter << ',' << fmt_double(r.value) << ',' << r.trial
        << ',' << r.p << r.q << ',' << fmt_double(r.error.linf) << ','
        << fmt_double(r.error.l2rho) << ',' << (r.error.absolute ? 1 : 0)
        << "\n";
  }
  {
    std::ofstream s = open_out(out / "sweep_summary.csv");
    written.push_back("sweep_summary.csv");
    s << "parameter,value,component,l2rho_mean,l2rho_std,linf_mean\n";
    for (std::size_t vi = 0; vi < spec.values.size(); ++vi)
      for (int p = 1; p <= 2; ++p)
        for (int q = 1; q <= 2; ++q) {
          const std::size_t idx =
              static_cast<std::size_t>(2 * (p - 1) + (q - 1));
          if (vi >= mean_by_comp[idx].size()) continue;
          s << spec.parameter << ',' << fmt_double(spec.values[vi]) << ','
            << detail::component_name(p, q) << ','
            << fmt_double(mean_by_comp[idx][vi]) << ','
            << fmt_double(std_by_comp[idx][vi]) << ','
            << fmt_double(linf_mean_by_comp[idx][vi]) << "\n";
        }
  }

  // Power-law fit over points with positive value and error; a sigma sweep
  // that includes 0 simply loses that point here.
  std::string annotation;
  {
    std::ofstream s = open_out(out / "slopes.csv");
    written.push_back("slopes.csv");
    s << "component,exponent,prefactor\n";
    for (int p = 1; p <= 2; ++p)
      for (int q = 1; q <= 2; ++q) {
        const std::size_t idx = static_cast<std::size_t>(2 * (p - 1) + (q - 1));
        std::vector<double> xs, ys;
        for (std::size_t vi = 0; vi < mean_by_comp[idx].size(); ++vi)
          if (spec.values[vi] > 0.0 && mean_by_comp[idx][vi] > 0.0) {
            xs.push_back(spec.values[vi]);
            ys.push_back(mean_by_comp[idx][vi]);
          }
        if (xs.size() < 2) continue;
        const PowerLawFit fitted = fit_power_law(xs, ys);
        s << detail::component_name(p, q) << ','
          << fmt_double(fitted.exponent) << ',' << fmt_double(fitted.prefactor)
          << "\n";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s%s:%.2f",
                      annotation.empty() ? "slope " : " ",
                      detail::component_name(p, q).c_str(), fitted.exponent);
        annotation += buf;
        std::cout << "slope phi" << detail::component_name(p, q) << " = "
                  << sci(fitted.exponent) << "\n";
      }
  }

  std::vector<SweepSeries> series;
  const char* colors[4] = {"#1f6fd0", "#2ca05a", "#d1495b", "#8857c5"};
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q) {
      const std::size_t idx = static_cast<std::size_t>(2 * (p - 1) + (q - 1));
      if (mean_by_comp[idx].empty()) continue;
      SweepSeries ss;
      ss.label = "phi" + detail::component_name(p, q);
      ss.color = colors[idx];
      ss.x = spec.values;
      ss.y = mean_by_comp[idx];
      series.push_back(std::move(ss));
    }
  save_sweep_plot_svg(out / "sweep.svg", series, spec.parameter,
                      "relative L2 error", "error vs " + spec.parameter,
                      annotation);
  written.push_back("sweep.svg");

  save_manifest(out / "manifest.json", "sweep", seed, canonical, written);
  return 0;
}

inline int cmd_transfer(const std::string& config_path, std::uint64_t seed,
                        const std::string& out_dir) {
  std::string canonical;
  const ExperimentConfig cfg = load_config(config_path, &canonical);
  if (!cfg.transfer)
    throw ConfigError("transfer command needs a 'transfer' section");
  const std::filesystem::path out(out_dir);
  std::vector<std::string> written;

  const SpeciesConfig sc = cfg.species();
  const KernelSet truth = preset(cfg.preset);
  const TrajectoryDataset ds =
      generate_dataset(sc, truth, cfg.num_trajectories, cfg.num_observations,
                       cfg.horizon, cfg.sigma, seed, cfg.dt_substeps);
  const Estimator est = fit_estimator(ds, cfg);
  const double radius = max_pair_distance(ds);
  const std::vector<double> grid = uniform_grid(radius, cfg.grid_points);
  std::array<Vec, 4> means;
  for (int p = 1; p <= 2; ++p)
    for (int q = 1; q <= 2; ++q)
      means[static_cast<std::size_t>(2 * (p - 1) + (q - 1))] =
          est.curve(p, q, grid, false).mean;
  const KernelSet learned = kernels_from_curves(grid, means);

  // First entry replays the training size as a reference point; species 2
  // scales with species 1 to keep the population ratio.
  std::vector<int> sizes = {cfg.n1};
  sizes.insert(sizes.end(), cfg.transfer->sizes.begin(),
               cfg.transfer->sizes.end());
  const double ratio = static_cast<double>(cfg.n2) / cfg.n1;

  std::ofstream csv = open_out(out / "transfer.csv");
  written.push_back("transfer.csv");
  csv << "n1,n2,interval,error\n";
  const std::vector<double> times = prediction_times(2.0 * cfg.horizon);
  const double dt = (times[1] - times[0]) / cfg.dt_substeps;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const SpeciesConfig big{
        sizes[si],
        std::max(1, static_cast<int>(std::lround(sizes[si] * ratio))),
        cfg.dim};
    Rng ic(stream_seed(seed, detail::kStreamTransferIc,
                       static_cast<std::uint64_t>(si)));
    const Mat x0 = sample_initial(big, ic);
    const Trajectory truth_traj =
        predict_trajectory(big, truth, x0, times, dt);
    const Trajectory pred_traj =
        predict_trajectory(big, learned, x0, times, dt);
    const double first = trajectory_error(truth_traj, pred_traj, 0, 100);
    const double second = trajectory_error(truth_traj, pred_traj, 99, 199);
    csv << big.n1 << ',' << big.n2 << ",first," << fmt_double(first) << "\n";
    csv << big.n1 << ',' << big.n2 << ",second," << fmt_double(second) << "\n";
    std::cout << "transfer n1=" << big.n1 << " n2=" << big.n2 << ": [0,T] "
              << sci(first) << ", [T,2T] " << sci(second) << "\n";
    if (cfg.dim >= 2) {
      const std::string name =
          "transfer_" + std::to_string(big.n1) + "_" + std::to_string(big.n2) +
          ".svg";
      save_trajectory_plot_svg(out / name, big, truth_traj, pred_traj,
                               cfg.horizon,
                               "transfer to " + std::to_string(big.n()) +
                                   " agents");
      written.push_back(name);
    }
  }
  csv.close();

  save_manifest(out / "manifest.json", "transfer", seed, canonical, written);
  return 0;
}

}  // namespace swarmgp

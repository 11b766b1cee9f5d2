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

// Experiment driver. Subcommands cover the full pipeline: simulate a
// dataset, train the estimator, evaluate errors, sweep a parameter axis,
// and transfer learned kernels to larger populations.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "swarmgp/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Learning interaction kernels in two-species particle systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Path to a JSON experiment config")
        ->required();
    cmd->add_option("--seed", seed, "Master RNG seed")->required();
    cmd->add_option("--out", out_dir, "Output directory (created if missing)")
        ->required();
  };

  CLI::App* sim = app.add_subcommand("simulate", "Generate a trajectory dataset");
  CLI::App* train = app.add_subcommand("train", "Fit the estimator on a dataset");
  CLI::App* eval = app.add_subcommand(
      "evaluate", "Run full trials: simulate, train, and score");
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Repeat evaluation along a declared parameter axis");
  CLI::App* transfer = app.add_subcommand(
      "transfer", "Apply learned kernels to larger populations");
  bool force = false;
  sweep->add_flag("--force", force,
                  "Run sweep points that exceed the dense-solver budget");
  for (CLI::App* cmd : {sim, train, eval, sweep, transfer}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return swarmgp::cmd_simulate(config_path, seed, out_dir);
    if (train->parsed()) return swarmgp::cmd_train(config_path, seed, out_dir);
    if (eval->parsed())
      return swarmgp::cmd_evaluate(config_path, seed, out_dir);
    if (sweep->parsed())
      return swarmgp::cmd_sweep(config_path, seed, out_dir, force);
    if (transfer->parsed())
      return swarmgp::cmd_transfer(config_path, seed, out_dir);
  } catch (const swarmgp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

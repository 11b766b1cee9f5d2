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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "swarmgp/dynamics.hpp"
#include "swarmgp/experiment.hpp"
#include "swarmgp/io.hpp"
#include "swarmgp/kernels.hpp"

namespace swarmgp {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("swarmgp_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << "missing file " << path;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

const char* kTinyConfig = R"({
  "preset": "repulsive",
  "n1": 2, "n2": 2,
  "num_trajectories": 2, "num_observations": 3,
  "horizon": 1.0, "sigma": 0.01,
  "trials": 2, "eval_trajectories": 10, "grid_points": 50
})";

TEST(FmtDouble, RoundTripsBitExactly) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e17, 1e-300, 0.0, 6.02214076e23}) {
    const double back = std::stod(fmt_double(v));
    EXPECT_EQ(back, v);
  }
}

TEST(Fnv1a64, MatchesPublishedVectors) {
  EXPECT_EQ(fnv1a64_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a64_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a64_hex("foobar"), "85944171f73967e8");
}

TEST(DatasetCsv, RoundTripsBitExactly) {
  const SpeciesConfig sc{2, 3, 2};
  const KernelSet truth = preset("repulsive");
  const TrajectoryDataset ds =
      generate_dataset(sc, truth, 3, 4, 2.0, 0.05, 99);
  const fs::path dir = fresh_dir("roundtrip");
  save_dataset_csv(dir / "d.csv", ds);

  const TrajectoryDataset back =
      load_dataset_csv(dir / "d.csv", sc, ds.horizon, ds.sigma);
  ASSERT_EQ(back.num_trajectories(), ds.num_trajectories());
  for (int m = 0; m < ds.num_trajectories(); ++m) {
    const Trajectory& a = ds.trajectories[static_cast<std::size_t>(m)];
    const Trajectory& b = back.trajectories[static_cast<std::size_t>(m)];
    ASSERT_EQ(b.num_obs(), a.num_obs());
    for (int l = 0; l < a.num_obs(); ++l) {
      EXPECT_EQ(b.times[static_cast<std::size_t>(l)],
                a.times[static_cast<std::size_t>(l)]);
      EXPECT_EQ(b.x[static_cast<std::size_t>(l)],
                a.x[static_cast<std::size_t>(l)]);
      EXPECT_EQ(b.v[static_cast<std::size_t>(l)],
                a.v[static_cast<std::size_t>(l)]);
    }
  }
}

TEST(DatasetCsv, HeaderNamesCoordinateColumns) {
  const SpeciesConfig sc{1, 1, 2};
  const TrajectoryDataset ds =
      generate_dataset(sc, preset("repulsive"), 1, 2, 1.0, 0.0, 1);
  const fs::path dir = fresh_dir("header");
  save_dataset_csv(dir / "d.csv", ds);
  const std::string text = read_file(dir / "d.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "m,l,t,agent,type,x0,x1,v0,v1");
}

TEST(Manifest, SortsOutputsAndIsByteStable) {
  const fs::path dir = fresh_dir("manifest");
  save_manifest(dir / "a.json", "train", 7, "{\"x\":1}",
                {"zeta.csv", "alpha.svg", "mid.txt"});
  save_manifest(dir / "b.json", "train", 7, "{\"x\":1}",
                {"mid.txt", "zeta.csv", "alpha.svg"});
  const std::string a = read_file(dir / "a.json");
  EXPECT_EQ(a, read_file(dir / "b.json"));
  EXPECT_NE(a.find("\"alpha.svg\", \"mid.txt\", \"zeta.csv\""),
            std::string::npos);
  EXPECT_NE(a.find(fnv1a64_hex("{\"x\":1}")), std::string::npos);
}

TEST(ConfigLoader, AppliesDefaultsForOptionalKeys) {
  const fs::path dir = fresh_dir("cfg_defaults");
  write_file(dir / "c.json",
             R"({"preset":"repulsive","n1":3,"n2":4,"num_trajectories":5,)"
             R"("num_observations":6,"horizon":2.5,"sigma":0.01})");
  std::string canonical;
  const ExperimentConfig c = load_config((dir / "c.json").string(), &canonical);
  EXPECT_EQ(c.preset, "repulsive");
  EXPECT_EQ(c.n1, 3);
  EXPECT_EQ(c.n2, 4);
  EXPECT_EQ(c.dim, 2);
  EXPECT_EQ(c.num_trajectories, 5);
  EXPECT_EQ(c.num_observations, 6);
  EXPECT_EQ(c.horizon, 2.5);
  EXPECT_EQ(c.trials, 10);
  EXPECT_FALSE(c.optimize_hyperparameters);
  EXPECT_EQ(c.optimize_iterations, 50);
  EXPECT_EQ(c.eval_trajectories, 2000);
  EXPECT_EQ(c.grid_points, 1000);
  EXPECT_EQ(c.dt_substeps, 10);
  EXPECT_FALSE(c.sweep.has_value());
  EXPECT_FALSE(c.transfer.has_value());
  EXPECT_FALSE(canonical.empty());
}

TEST(ConfigLoader, RejectsDefectiveConfigs) {
  const fs::path dir = fresh_dir("cfg_bad");
  auto expect_rejected = [&](const std::string& name, const std::string& body) {
    write_file(dir / name, body);
    EXPECT_THROW(load_config((dir / name).string()), ConfigError) << name;
  };
  const std::string base =
      R"("n1":2,"n2":2,"num_trajectories":2,"num_observations":2,)"
      R"("horizon":1.0,"sigma":0.01)";
  expect_rejected("not_json.json", "][");
  expect_rejected("root_array.json", "[1,2]");
  expect_rejected("missing.json", R"({"preset":"repulsive","n1":2})");
  expect_rejected("unknown.json",
                  R"({"preset":"repulsive",)" + base + R"(,"bogus":1})");
  expect_rejected("bad_preset.json", R"({"preset":"nope",)" + base + "}");
  expect_rejected("string_sigma.json",
                  R"({"preset":"repulsive","n1":2,"n2":2,"num_trajectories":2,)"
                  R"("num_observations":2,"horizon":1.0,"sigma":"big"})");
  expect_rejected("float_n1.json",
                  R"({"preset":"repulsive","n1":2.5,"n2":2,"num_trajectories":2,)"
                  R"("num_observations":2,"horizon":1.0,"sigma":0.01})");
  expect_rejected("zero_horizon.json",
                  R"({"preset":"repulsive","n1":2,"n2":2,"num_trajectories":2,)"
                  R"("num_observations":2,"horizon":0.0,"sigma":0.01})");
  expect_rejected("neg_sigma.json",
                  R"({"preset":"repulsive","n1":2,"n2":2,"num_trajectories":2,)"
                  R"("num_observations":2,"horizon":1.0,"sigma":-0.1})");
  expect_rejected("one_grid_point.json",
                  R"({"preset":"repulsive",)" + base + R"(,"grid_points":1})");
  expect_rejected("sweep_param.json",
                  R"({"preset":"repulsive",)" + base +
                      R"(,"sweep":{"parameter":"dt","values":[1]}})");
  expect_rejected("sweep_frac_m.json",
                  R"({"preset":"repulsive",)" + base +
                      R"(,"sweep":{"parameter":"num_traj","values":[2.5]}})");
  expect_rejected("sweep_extra.json",
                  R"({"preset":"repulsive",)" + base +
                      R"(,"sweep":{"parameter":"sigma","values":[0.1],"x":1}})");
  expect_rejected("transfer_zero.json",
                  R"({"preset":"repulsive",)" + base +
                      R"(,"transfer":{"sizes":[0]}})");
}

TEST(ConfigLoader, ParsesSweepAndTransferSections) {
  const fs::path dir = fresh_dir("cfg_sections");
  write_file(dir / "c.json",
             R"({"preset":"linear_repulsive","n1":5,"n2":5,)"
             R"("num_trajectories":10,"num_observations":2,"horizon":5.0,)"
             R"("sigma":0.05,"sweep":{"parameter":"num_traj",)"
             R"("values":[1,10,100]},"transfer":{"sizes":[50,100]}})");
  const ExperimentConfig c = load_config((dir / "c.json").string());
  ASSERT_TRUE(c.sweep.has_value());
  EXPECT_EQ(c.sweep->parameter, "num_traj");
  EXPECT_EQ(c.sweep->values, (std::vector<double>{1.0, 10.0, 100.0}));
  ASSERT_TRUE(c.transfer.has_value());
  EXPECT_EQ(c.transfer->sizes, (std::vector<int>{50, 100}));
}

TEST(CmdSimulate, WritesOneRowPerObservedAgent) {
  const fs::path dir = fresh_dir("sim");
  write_file(dir / "c.json", kTinyConfig);
  ASSERT_EQ(cmd_simulate((dir / "c.json").string(), 5,
                         (dir / "out").string()),
            0);
  const std::string csv = read_file(dir / "out" / "dataset.csv");
  // header + M * L * N rows
  EXPECT_EQ(count_lines(csv), 1 + 2 * 3 * 4);
  EXPECT_NE(read_file(dir / "out" / "manifest.json").find("\"simulate\""),
            std::string::npos);
}

TEST(CmdSimulate, ZeroNoiseVelocitiesMatchTheForceField) {
  const fs::path dir = fresh_dir("sim_clean");
  write_file(dir / "c.json",
             R"({"preset":"repulsive","n1":2,"n2":2,"num_trajectories":2,)"
             R"("num_observations":3,"horizon":1.0,"sigma":0.0})");
  ASSERT_EQ(cmd_simulate((dir / "c.json").string(), 11,
                         (dir / "out").string()),
            0);
  const SpeciesConfig sc{2, 2, 2};
  const TrajectoryDataset ds =
      load_dataset_csv(dir / "out" / "dataset.csv", sc, 1.0, 0.0);
  const KernelSet truth = preset("repulsive");
  for (const Trajectory& traj : ds.trajectories)
    for (int l = 0; l < traj.num_obs(); ++l)
      EXPECT_EQ(traj.v[static_cast<std::size_t>(l)],
                force_field(sc, truth, traj.x[static_cast<std::size_t>(l)]));
}

TEST(CmdEvaluate, RerunsAreByteIdentical) {
  const fs::path dir = fresh_dir("eval_det");
  write_file(dir / "c.json", kTinyConfig);
  ASSERT_EQ(cmd_evaluate((dir / "c.json").string(), 17, (dir / "a").string()),
            0);
  ASSERT_EQ(cmd_evaluate((dir / "c.json").string(), 17, (dir / "b").string()),
            0);
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir / "a");
    EXPECT_EQ(read_file(entry.path()), read_file(dir / "b" / rel)) << rel;
    ++compared;
  }
  EXPECT_GE(compared, 10);
}

TEST(CmdEvaluate, WritesErrorTablesAndWellFormedSvg) {
  const fs::path dir = fresh_dir("eval_files");
  write_file(dir / "c.json", kTinyConfig);
  ASSERT_EQ(cmd_evaluate((dir / "c.json").string(), 23,
                         (dir / "out").string()),
            0);
  // 2 trials x 4 components plus the header line.
  EXPECT_EQ(count_lines(read_file(dir / "out" / "kernel_errors.csv")),
            1 + 2 * 4);
  EXPECT_EQ(count_lines(read_file(dir / "out" / "traj_errors.csv")),
            1 + 2 * 4);
  EXPECT_EQ(count_lines(read_file(dir / "out" / "trial_00" / "curves_11.csv")),
            1 + 50);
  int svgs = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "out")) {
    if (entry.path().extension() != ".svg") continue;
    const std::string body = read_file(entry.path());
    EXPECT_EQ(body.rfind("<svg", 0), 0u) << entry.path();
    EXPECT_NE(body.find("</svg>"), std::string::npos) << entry.path();
    ++svgs;
  }
  EXPECT_EQ(svgs, 6);  // 4 kernel plots + 2 trajectory overlays
}

TEST(CmdTrain, WritesCurvesCoefficientsAndHyperparams) {
  const fs::path dir = fresh_dir("train");
  write_file(dir / "c.json", kTinyConfig);
  ASSERT_EQ(cmd_train((dir / "c.json").string(), 3, (dir / "out").string()),
            0);
  for (const char* name : {"curves_11.csv", "curves_12.csv", "curves_21.csv",
                           "curves_22.csv", "coefficients.csv",
                           "hyperparams.txt", "kernel_11.svg"})
    EXPECT_TRUE(fs::exists(dir / "out" / name)) << name;
  const std::string hp = read_file(dir / "out" / "hyperparams.txt");
  EXPECT_NE(hp.find("theta11.s2 "), std::string::npos);
  EXPECT_NE(hp.find("sigma2 "), std::string::npos);
  EXPECT_NE(hp.find("nlml "), std::string::npos);
}

TEST(CmdSweep, RunsDeclaredAxisAndFitsSlopes) {
  const fs::path dir = fresh_dir("sweep");
  write_file(dir / "c.json",
             R"({"preset":"linear_repulsive","n1":2,"n2":2,)"
             R"("num_trajectories":2,"num_observations":2,"horizon":2.0,)"
             R"("sigma":0.05,"trials":2,"eval_trajectories":10,)"
             R"("grid_points":50,"sweep":{"parameter":"num_traj",)"
             R"("values":[2,8]}})");
  ASSERT_EQ(cmd_sweep((dir / "c.json").string(), 31, (dir / "out").string(),
                      false),
            0);
  // 2 values x 2 trials x 4 components plus the header.
  EXPECT_EQ(count_lines(read_file(dir / "out" / "sweep.csv")), 1 + 2 * 2 * 4);
  EXPECT_EQ(count_lines(read_file(dir / "out" / "slopes.csv")), 1 + 4);
  EXPECT_TRUE(fs::exists(dir / "out" / "sweep.svg"));
}

TEST(CmdSweep, RefusesOversizedPointsWithoutForce) {
  const fs::path dir = fresh_dir("sweep_budget");
  write_file(dir / "c.json",
             R"({"preset":"linear_repulsive","n1":2,"n2":2,)"
             R"("num_trajectories":2,"num_observations":2,"horizon":2.0,)"
             R"("sigma":0.05,"trials":1,"eval_trajectories":10,)"
             R"("grid_points":50,"sweep":{"parameter":"num_traj",)"
             R"("values":[1000000]}})");
  EXPECT_THROW(cmd_sweep((dir / "c.json").string(), 1, (dir / "out").string(),
                         false),
               ConfigError);
}

TEST(CmdTransfer, ScalesPopulationsAndReportsBothIntervals) {
  const fs::path dir = fresh_dir("transfer");
  write_file(dir / "c.json",
             R"({"preset":"linear_repulsive","n1":3,"n2":2,)"
             R"("num_trajectories":3,"num_observations":2,"horizon":2.0,)"
             R"("sigma":0.05,"transfer":{"sizes":[6]}})");
  ASSERT_EQ(cmd_transfer((dir / "c.json").string(), 41,
                         (dir / "out").string()),
            0);
  const std::string csv = read_file(dir / "out" / "transfer.csv");
  // base size plus one transfer size, two intervals each.
  EXPECT_EQ(count_lines(csv), 1 + 2 * 2);
  EXPECT_NE(csv.find("3,2,first,"), std::string::npos);
  EXPECT_NE(csv.find("6,4,first,"), std::string::npos);  // ratio 2:3 kept
  EXPECT_TRUE(fs::exists(dir / "out" / "transfer_6_4.svg"));
}

}  // namespace
}  // namespace swarmgp

/* Copyright 2026 The lvcal Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "lvcal/experiment.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace lvcal {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lvcal_experiment_test" / name;
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig small_experiment(const std::string& preset, const fs::path& out) {
  ExperimentConfig cfg;
  cfg.preset = preset;
  cfg.world.num_categories = 12;
  cfg.world.total_instances = 400;
  cfg.world.feature_dim = 8;
  cfg.world.zipf_exponent = 1.6;
  cfg.schedule.epochs = 3;
  cfg.schedule.stages = {{0, 0.01}, {2, 0.001}};
  cfg.out = out;
  return cfg;
}

TEST(Config, RenderParseRoundTrip) {
  ExperimentConfig cfg = small_experiment("table5", "some/dir");
  cfg.seed = 42;
  cfg.strategy = Strategy::kCatScale;
  cfg.tail_bins = {BinId::kRare};
  cfg.eval.iou_thresholds = {0.5, 0.75};
  cfg.world.group_correlation = 0.3;
  const std::string text = render_config(cfg);
  const ExperimentConfig back = parse_config(text);
  EXPECT_EQ(render_config(back), text);
  EXPECT_EQ(config_fingerprint(back), config_fingerprint(cfg));
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.strategy, Strategy::kCatScale);
}

TEST(Config, CommentsAndDefaults) {
  const auto cfg = parse_config(
      "# comment\n"
      "preset = \"table2\"\n"
      "\n"
      "[world]\n"
      "num_categories = 7   # trailing\n"
      "[decode]\n"
      "score_threshold = 0.05\n");
  EXPECT_EQ(cfg.preset, "table2");
  EXPECT_EQ(cfg.world.num_categories, 7);
  EXPECT_DOUBLE_EQ(cfg.decode.score_threshold, 0.05);
  EXPECT_EQ(cfg.world.feature_dim, ExperimentConfig{}.world.feature_dim);
}

void expect_error_mentions(const std::string& text, const std::string& needle) {
  try {
    parse_config(text, "exp.conf");
    FAIL() << "accepted: " << text;
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(Config, Errors) {
  expect_error_mentions("[world]\nbogus = 1\n", "exp.conf:2");
  expect_error_mentions("[world]\nbogus = 1\n", "world.bogus");
  expect_error_mentions("seed\n", "key = value");
  expect_error_mentions("[world\n", "section");
  expect_error_mentions("[world]\nnum_categories = \"many\"\n", "num_categories");
  expect_error_mentions("[calib]\nstrategy = \"bogus\"\n", "bogus");
  expect_error_mentions("[train]\nmode = \"fancy\"\n", "fancy");
}

TEST(Config, ValidateRejects) {
  ExperimentConfig cfg;
  cfg.preset = "table99";
  EXPECT_THROW(cfg.validate(), Error);
  cfg = ExperimentConfig{};
  cfg.world.num_categories = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = ExperimentConfig{};
  cfg.repeat_threshold = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = ExperimentConfig{};
  cfg.schedule.momentum = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Presets, Table1FromCountFile) {
  const fs::path dir = fresh_dir("table1");
  fs::create_directories(dir);
  std::ofstream(dir / "counts.csv") << "category_id,count\n0,1500\n1,400\n2,12\n3,3\n4,9\n";
  ExperimentConfig cfg;
  cfg.preset = "table1";
  cfg.counts_path = dir / "counts.csv";
  cfg.out = dir / "out";
  run_experiment(cfg);
  EXPECT_EQ(slurp(dir / "out" / "table1.csv"),
            "set,\"(0,10)\",\"[10,100)\",\"[100,1000)\",\"[1000,-]\",total\n"
            "Train,2,1,1,1,5\n");
}

TEST(Presets, Table5WritesSevenReports) {
  const fs::path dir = fresh_dir("table5");
  const auto result = run_experiment(small_experiment("table5", dir));
  EXPECT_EQ(result.reports.size(), 7u);
  int csv = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.path().extension() == ".csv" && name != "summary.csv") ++csv;
  }
  EXPECT_EQ(csv, 7);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "head_mrcnn.json"));
}

TEST(Presets, Table2ThresholdOrdering) {
  const auto result = run_experiment(small_experiment("table2", fresh_dir("table2")));
  EXPECT_GE(*result.report("mrcnn").overall_ap, *result.report("mrcnn-thr").overall_ap);
}

TEST(Presets, SameSeedSameBytes) {
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  run_experiment(small_experiment("table7", a));
  run_experiment(small_experiment("table7", b));
  int compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const fs::path other = b / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path().filename();
    ++compared;
  }
  EXPECT_GT(compared, 3);
}

TEST(Presets, WorldFileIsReused) {
  const fs::path dir = fresh_dir("world_file");
  ExperimentConfig cfg = small_experiment("custom", dir / "run");
  const World w = world_for(cfg);
  fs::create_directories(dir);
  save_world(w, dir / "world.json");
  ExperimentConfig from_file = cfg;
  from_file.world_path = dir / "world.json";
  EXPECT_EQ(world_to_json(world_for(from_file)).dump(), world_to_json(w).dump());
}

}  // namespace
}  // namespace lvcal

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
// Command-line front end: world generation, head training, calibration,
// evaluation and the preset experiment runner.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lvcal/experiment.h"

namespace {

using lvcal::ExperimentConfig;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string world;
  std::string out = "out";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Experiment config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Seed for world generation and training");
  cmd->add_option("--world", o.world, "Frozen world JSON")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory");
}

ExperimentConfig make_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : lvcal::load_config(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.world.seed = *o.seed;
  }
  if (!o.world.empty()) cfg.world_path = o.world;
  cfg.out = o.out;
  return cfg;
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "   -  ";
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * *v);
  return buf;
}

void print_table(const std::vector<lvcal::NamedReport>& reports) {
  std::printf("%-28s", "report");
  for (lvcal::BinId b : lvcal::kAllBins) {
    std::printf(" %11s", std::string(lvcal::bin_label(b)).c_str());
  }
  std::printf(" %8s %7s\n", "AP", "AR");
  for (const auto& r : reports) {
    std::printf("%-28s", r.name.c_str());
    for (int b = 0; b < lvcal::kNumBins; ++b) {
      std::printf(" %6s (%3d)", pct(r.report.per_bin_ap[b]).c_str(),
                  r.report.per_bin_class_count[b]);
    }
    std::printf(" %8s %7s\n", pct(r.report.overall_ap).c_str(),
                pct(r.report.ar_at_k).c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-tail detection calibration toolkit"};
  app.require_subcommand(1);

  CommonOptions gen_opts;
  auto* gen = app.add_subcommand("gen-world", "Generate and save a synthetic world");
  add_common(gen, gen_opts);

  CommonOptions train_opts;
  std::string mode = "standard";
  auto* train = app.add_subcommand("train", "Train a classification head");
  add_common(train, train_opts);
  train->add_option("--mode", mode, "standard|balanced|repeat");

  CommonOptions cal_opts;
  std::string orig_path, new_path, strategy = "cat";
  std::optional<double> cal_thr;
  auto* cal = app.add_subcommand("calibrate", "Combine two heads and decode validation detections");
  add_common(cal, cal_opts);
  cal->add_option("--orig", orig_path, "Original head checkpoint")->required()->check(CLI::ExistingFile);
  cal->add_option("--new", new_path, "Retrained head checkpoint")->required()->check(CLI::ExistingFile);
  cal->add_option("--strategy", strategy, "only|avg|det|cat|cat-thr|cat-scale");
  cal->add_option("--score-thr", cal_thr, "Detection score threshold");

  CommonOptions eval_opts;
  std::string dets_path;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a detection file on the validation split");
  add_common(evaluate, eval_opts);
  evaluate->add_option("--dets", dets_path, "Detections JSON")->required()->check(CLI::ExistingFile);

  CommonOptions run_opts;
  std::string preset;
  std::string run_strategy;
  std::optional<double> run_thr;
  std::string counts;
  auto* run = app.add_subcommand("run", "Run a full experiment preset");
  add_common(run, run_opts);
  run->add_option("--preset", preset, "custom|table1..table8");
  run->add_option("--strategy", run_strategy, "Strategy for the custom preset");
  run->add_option("--score-thr", run_thr, "Detection score threshold");
  run->add_option("--counts", counts, "category_id,count CSV for table1")->check(CLI::ExistingFile);

  CommonOptions imp_opts;
  std::string import_path;
  auto* imp = app.add_subcommand("import-dets", "Validate external detections; evaluate with --world");
  add_common(imp, imp_opts);
  imp->add_option("--dets", import_path, "Detections JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const ExperimentConfig cfg = make_config(gen_opts);
      const lvcal::World world = lvcal::world_for(cfg);
      std::filesystem::create_directories(cfg.out);
      lvcal::save_world(world, cfg.out / "world.json");
      const auto sizes = lvcal::bin_sizes(world.train_counts());
      std::printf("wrote %s: %d categories (%d/%d/%d/%d per bin), %zu train / %zu val images\n",
                  (cfg.out / "world.json").string().c_str(), world.num_categories(), sizes[0],
                  sizes[1], sizes[2], sizes[3], world.train_images.size(),
                  world.val_images.size());
    } else if (*train) {
      ExperimentConfig cfg = make_config(train_opts);
      cfg.mode = lvcal::parse_train_mode(mode);
      cfg.validate();
      const lvcal::World world = lvcal::world_for(cfg);
      const lvcal::Head head = lvcal::train_head(world, cfg, cfg.mode);
      std::filesystem::create_directories(cfg.out);
      const auto path = cfg.out / "head.json";
      lvcal::save_head(head, lvcal::config_fingerprint(cfg), path);
      std::printf("wrote %s\n", path.string().c_str());
    } else if (*cal) {
      ExperimentConfig cfg = make_config(cal_opts);
      if (cal_thr) cfg.decode.score_threshold = *cal_thr;
      const lvcal::Strategy s = lvcal::parse_strategy(strategy);
      cfg.validate();
      const lvcal::World world = lvcal::world_for(cfg);
      const lvcal::Evaluator ev(world, cfg.decode, cfg.eval);
      const lvcal::ScoreMatrix so = ev.scores(lvcal::load_head(orig_path));
      const lvcal::ScoreMatrix sn = ev.scores(lvcal::load_head(new_path));
      const auto split = lvcal::BinSplit::from_categories(world.categories, cfg.tail_bins);
      std::vector<lvcal::Detection> dets;
      if (s == lvcal::Strategy::kDet) {
        dets = lvcal::combine_detections_det(ev.decode(so), ev.decode(sn), split,
                                             cfg.decode.max_per_image);
      } else {
        dets = ev.decode(lvcal::combine(s, so, sn, split, cfg.combine));
      }
      std::filesystem::create_directories(cfg.out);
      lvcal::export_detections(dets, cfg.out / "detections.json");
      std::printf("wrote %zu detections to %s\n", dets.size(),
                  (cfg.out / "detections.json").string().c_str());
    } else if (*evaluate) {
      const ExperimentConfig cfg = make_config(eval_opts);
      const lvcal::World world = lvcal::world_for(cfg);
      const lvcal::Evaluator ev(world, cfg.decode, cfg.eval);
      const auto dets = lvcal::import_detections(dets_path);
      const lvcal::EvalReport report = ev.evaluate(dets);
      lvcal::write_report(report, world.categories, cfg.out, "report");
      print_table({{"report", report}});
    } else if (*run) {
      ExperimentConfig cfg = make_config(run_opts);
      if (!preset.empty()) cfg.preset = preset;
      if (!run_strategy.empty()) cfg.strategy = lvcal::parse_strategy(run_strategy);
      if (run_thr) cfg.decode.score_threshold = *run_thr;
      if (!counts.empty()) cfg.counts_path = counts;
      const auto result = lvcal::run_experiment(cfg);
      if (result.reports.empty()) {
        for (const auto& f : result.files) std::printf("wrote %s\n", f.string().c_str());
      } else {
        print_table(result.reports);
        std::printf("outputs in %s\n", cfg.out.string().c_str());
      }
    } else if (*imp) {
      const ExperimentConfig cfg = make_config(imp_opts);
      const auto dets = lvcal::import_detections(import_path);
      std::filesystem::create_directories(cfg.out);
      lvcal::export_detections(dets, cfg.out / "detections.json");
      std::printf("imported %zu detections\n", dets.size());
      if (cfg.world_path) {
        const lvcal::World world = lvcal::world_for(cfg);
        const lvcal::Evaluator ev(world, cfg.decode, cfg.eval);
        const lvcal::EvalReport report = ev.evaluate(dets);
        lvcal::write_report(report, world.categories, cfg.out, "report");
        print_table({{"imported", report}});
      }
    }
  } catch (const lvcal::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

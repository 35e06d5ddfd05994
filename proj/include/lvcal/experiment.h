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
#ifndef LVCAL_EXPERIMENT_H_
#define LVCAL_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lvcal/calib.h"
#include "lvcal/eval.h"
#include "lvcal/heads.h"
#include "lvcal/twostage.h"
#include "lvcal/world.h"

namespace lvcal {

enum class TrainMode { kStandard, kBalanced, kRepeat };
std::string_view train_mode_name(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);

struct ExperimentConfig {
  std::string preset = "custom";
  std::uint64_t seed = 0;
  WorldConfig world;
  std::optional<std::filesystem::path> world_path;
  std::optional<std::filesystem::path> counts_path;
  TrainMode mode = TrainMode::kStandard;
  TrainSchedule schedule;
  BalancedSamplerConfig balanced;
  double repeat_threshold = 0.01;
  Strategy strategy = Strategy::kCat;
  CombineOptions combine;
  std::vector<BinId> tail_bins = {BinId::kRare, BinId::kFew};
  DecodeConfig decode = {0.0, 0.5, 300};
  EvalConfig eval;
  int ensemble_size = 2;
  int cascade_stages = 3;
  std::filesystem::path out = "out";

  void validate() const;
};

// Presets: custom, table1, table2, table3, table4, table5, table6, table7,
// table8.
const std::vector<std::string>& preset_names();

// Parses the key/value config document (see README for the grammar):
//   key = value            values are JSON literals: 1, 0.5, true, "str", [..]
//   [section]              world, train, balanced, repeat, calib, decode, eval
// Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical rendering in the same grammar; parse_config accepts it.
std::string render_config(const ExperimentConfig& cfg);
std::string config_fingerprint(const ExperimentConfig& cfg);

struct NamedReport {
  std::string name;
  EvalReport report;
};

struct ExperimentResult {
  std::vector<NamedReport> reports;
  std::vector<std::filesystem::path> files;

  const EvalReport& report(std::string_view name) const;
};

// Everything needed to evaluate heads on one world's validation split.
class Evaluator {
 public:
  Evaluator(const World& world, const DecodeConfig& decode,
            const EvalConfig& eval);

  const std::vector<Proposal>& proposals() const { return flat_; }
  const Matrix& features() const { return features_; }
  ScoreMatrix scores(const Head& head) const;
  std::vector<Detection> decode(const ScoreMatrix& scores) const;
  EvalReport evaluate(std::span<const Detection> dets) const;
  EvalReport evaluate(const ScoreMatrix& scores) const;
  double average_recall() const;
  const DecodeConfig& decode_config() const { return decode_; }

 private:
  const World& world_;
  DecodeConfig decode_;
  EvalConfig eval_;
  std::vector<std::vector<Proposal>> per_image_;
  std::vector<Proposal> flat_;
  Matrix features_;
};

World world_for(const ExperimentConfig& cfg);
Head train_head(const World& world, const ExperimentConfig& cfg, TrainMode mode,
                std::uint64_t stream_index = 0);

// Runs the preset named in cfg.preset and writes reports, head checkpoints,
// a summary table and a manifest under cfg.out.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Bin-size table over raw per-category counts (the table1 preset).
std::string bin_table_csv(const std::vector<int>& train_counts,
                          const std::optional<std::vector<int>>& val_counts);

}  // namespace lvcal

#endif  // LVCAL_EXPERIMENT_H_

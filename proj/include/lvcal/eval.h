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
#ifndef LVCAL_EVAL_H_
#define LVCAL_EVAL_H_

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lvcal/twostage.h"
#include "lvcal/world.h"

namespace lvcal {

struct EvalConfig {
  std::vector<double> iou_thresholds = default_iou_thresholds();
  int recall_points = 101;
  int max_detections = 300;  // per image, across classes; <= 0 disables
  int proposal_k = 1000;

  static std::vector<double> default_iou_thresholds();  // 0.50:0.05:0.95
  void validate() const;
};

struct EvalReport {
  std::optional<double> overall_ap;
  // Empty entries are categories without ground truth in the eval split.
  std::vector<std::optional<double>> per_category_ap;
  std::array<std::optional<double>, kNumBins> per_bin_ap{};
  // Categories that contributed to each bin's AP.
  std::array<int, kNumBins> per_bin_class_count{};
  // All categories of the bin, present in the eval split or not.
  std::array<int, kNumBins> per_bin_total_classes{};
  std::optional<double> ar_at_k;
  int proposal_k = 0;
};

// AP for one category at one IoU threshold. Detections must already be the
// category's own. Exposed for the per-threshold tests.
double average_precision(std::span<const Detection> dets,
                         std::span<const SceneImage> gts, int category_id,
                         double iou_threshold, int recall_points = 101);

// COCO-style AP per category averaged over cfg.iou_thresholds. Categories
// with no ground truth come back empty.
std::vector<std::optional<double>> ap_per_category(
    std::span<const Detection> dets, std::span<const SceneImage> gts,
    int num_categories, const EvalConfig& cfg = {});

EvalReport binned_report(std::span<const std::optional<double>> per_category_ap,
                         std::span<const Category> categories);

// Average recall over cfg.iou_thresholds of the top-k proposals per image by
// objectness. Proposals claim GTs in objectness order, each taking its
// best-overlapping unclaimed GT.
double proposal_recall(std::span<const std::vector<Proposal>> proposals,
                       std::span<const SceneImage> gts, int k,
                       const EvalConfig& cfg = {});

// Proposals matched at IoU >= 0.5 become detections labelled with their
// GT's class and scored by their IoU.
std::vector<Detection> oracle_detections(
    std::span<const std::vector<Proposal>> proposals,
    std::span<const SceneImage> gts);
EvalReport oracle_gt_label_eval(std::span<const std::vector<Proposal>> proposals,
                                std::span<const SceneImage> gts,
                                std::span<const Category> categories,
                                const EvalConfig& cfg = {});

EvalReport evaluate_detections(std::span<const Detection> dets,
                               std::span<const SceneImage> gts,
                               std::span<const Category> categories,
                               const EvalConfig& cfg = {});

// Report files. The CSV has one row per category:
//   category_id,train_count,val_count,bin,ap
// with `ap` empty for absent categories.
std::string report_csv(const EvalReport& report,
                       std::span<const Category> categories);
nlohmann::ordered_json report_summary_json(const EvalReport& report);
void write_report(const EvalReport& report, std::span<const Category> categories,
                  const std::filesystem::path& dir, const std::string& name);

}  // namespace lvcal

#endif  // LVCAL_EVAL_H_

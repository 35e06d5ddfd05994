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
#include "lvcal/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

namespace lvcal {

namespace {

// One category's detections in ranking order, each with its overlaps against
// the category's GTs in the same image. GT indices are global within the
// category.
struct RankedCategory {
  std::vector<std::vector<std::pair<int, double>>> overlaps;
  int num_gt = 0;
};

RankedCategory rank_category(std::span<const Detection> dets,
                             std::span<const std::size_t> det_indices,
                             const std::map<int, std::vector<std::pair<int, Box>>>&
                                 gts_by_image,
                             int num_gt) {
  std::vector<std::size_t> order(det_indices.begin(), det_indices.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  RankedCategory rc;
  rc.num_gt = num_gt;
  rc.overlaps.resize(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Detection& d = dets[order[k]];
    auto it = gts_by_image.find(d.image_id);
    if (it == gts_by_image.end()) continue;
    for (const auto& [g, box] : it->second) {
      rc.overlaps[k].emplace_back(g, iou(d.box, box));
    }
  }
  return rc;
}

double ap_at_threshold(const RankedCategory& rc, double threshold,
                       int recall_points) {
  if (rc.num_gt == 0) return 0.0;
  std::vector<char> taken(rc.num_gt, 0);
  std::vector<long long> tp_cum(rc.overlaps.size());
  std::vector<double> precision(rc.overlaps.size());
  long long tp = 0;
  for (std::size_t k = 0; k < rc.overlaps.size(); ++k) {
    int best = -1;
    double best_iou = 0.0;
    for (const auto& [g, o] : rc.overlaps[k]) {
      if (taken[g] || o < threshold) continue;
      if (best < 0 || o > best_iou) {
        best = g;
        best_iou = o;
      }
    }
    if (best >= 0) {
      taken[best] = 1;
      ++tp;
    }
    tp_cum[k] = tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  for (std::size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  // Recall point j is j / (R - 1); compare in integers to avoid rounding.
  const long long steps = std::max(1, recall_points - 1);
  double sum = 0.0;
  for (int j = 0; j < recall_points; ++j) {
    const long long need = static_cast<long long>(j) * rc.num_gt;
    auto it = std::lower_bound(tp_cum.begin(), tp_cum.end(), need,
                               [&](long long have, long long n) {
                                 return have * steps < n;
                               });
    if (it != tp_cum.end()) sum += precision[it - tp_cum.begin()];
  }
  return sum / recall_points;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  return buf;
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::vector<double> EvalConfig::default_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw Error("eval: need at least one IoU threshold");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) throw Error("eval: IoU thresholds must lie in (0,1]");
    if (i > 0 && t <= iou_thresholds[i - 1]) {
      throw Error("eval: IoU thresholds must be strictly increasing");
    }
  }
  if (recall_points < 2) throw Error("eval: need at least two recall points");
  if (proposal_k < 1) throw Error("eval: proposal_k must be >= 1");
}

double average_precision(std::span<const Detection> dets,
                         std::span<const SceneImage> gts, int category_id,
                         double iou_threshold, int recall_points) {
  std::map<int, std::vector<std::pair<int, Box>>> by_image;
  int num_gt = 0;
  for (const auto& img : gts) {
    for (const auto& o : img.objects) {
      if (o.category_id == category_id) by_image[img.id].emplace_back(num_gt++, o.box);
    }
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].category_id == category_id) idx.push_back(i);
  }
  const RankedCategory rc = rank_category(dets, idx, by_image, num_gt);
  return ap_at_threshold(rc, iou_threshold, recall_points);
}

std::vector<std::optional<double>> ap_per_category(
    std::span<const Detection> dets_in, std::span<const SceneImage> gts,
    int num_categories, const EvalConfig& cfg) {
  cfg.validate();
  std::vector<Detection> capped;
  std::span<const Detection> dets = dets_in;
  if (cfg.max_detections > 0) {
    capped = cap_per_image(std::vector<Detection>(dets_in.begin(), dets_in.end()),
                           cfg.max_detections);
    dets = capped;
  }

  std::vector<std::map<int, std::vector<std::pair<int, Box>>>> gt_index(
      num_categories);
  std::vector<int> num_gt(num_categories, 0);
  for (const auto& img : gts) {
    for (const auto& o : img.objects) {
      if (o.category_id < 0 || o.category_id >= num_categories) continue;
      gt_index[o.category_id][img.id].emplace_back(num_gt[o.category_id]++, o.box);
    }
  }
  std::vector<std::vector<std::size_t>> det_index(num_categories);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const int c = dets[i].category_id;
    if (c >= 0 && c < num_categories) det_index[c].push_back(i);
  }

  std::vector<std::optional<double>> out(num_categories);
  for (int c = 0; c < num_categories; ++c) {
    if (num_gt[c] == 0) continue;
    const RankedCategory rc = rank_category(dets, det_index[c], gt_index[c], num_gt[c]);
    double sum = 0.0;
    for (double t : cfg.iou_thresholds) sum += ap_at_threshold(rc, t, cfg.recall_points);
    out[c] = sum / static_cast<double>(cfg.iou_thresholds.size());
  }
  return out;
}

EvalReport binned_report(std::span<const std::optional<double>> per_category_ap,
                         std::span<const Category> categories) {
  if (per_category_ap.size() != categories.size()) {
    throw Error("binned_report: one AP slot per category required");
  }
  EvalReport report;
  report.per_category_ap.assign(per_category_ap.begin(), per_category_ap.end());
  std::vector<double> all;
  std::array<std::vector<double>, kNumBins> per_bin;
  for (const auto& cat : categories) {
    const int b = bin_index(cat.bin);
    ++report.per_bin_total_classes[b];
    const auto& ap = per_category_ap[cat.id];
    if (!ap) continue;
    all.push_back(*ap);
    per_bin[b].push_back(*ap);
  }
  report.overall_ap = mean_of(all);
  for (int b = 0; b < kNumBins; ++b) {
    report.per_bin_ap[b] = mean_of(per_bin[b]);
    report.per_bin_class_count[b] = static_cast<int>(per_bin[b].size());
  }
  return report;
}

double proposal_recall(std::span<const std::vector<Proposal>> proposals,
                       std::span<const SceneImage> gts, int k,
                       const EvalConfig& cfg) {
  cfg.validate();
  if (proposals.size() != gts.size()) {
    throw Error("proposal_recall: one proposal list per image required");
  }
  long long total_gt = 0;
  for (const auto& img : gts) total_gt += static_cast<long long>(img.objects.size());
  if (total_gt == 0) return 0.0;

  // Overlaps of the top-k proposals, best objectness first.
  std::vector<std::vector<std::vector<double>>> overlaps(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto& props = proposals[i];
    std::vector<std::size_t> order(props.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return props[a].objectness > props[b].objectness;
    });
    if (k >= 0 && order.size() > static_cast<std::size_t>(k)) order.resize(k);
    for (std::size_t p : order) {
      std::vector<double> row;
      row.reserve(gts[i].objects.size());
      for (const auto& o : gts[i].objects) row.push_back(iou(props[p].box, o.box));
      overlaps[i].push_back(std::move(row));
    }
  }

  double sum = 0.0;
  for (double t : cfg.iou_thresholds) {
    long long matched = 0;
    for (std::size_t i = 0; i < gts.size(); ++i) {
      std::vector<char> taken(gts[i].objects.size(), 0);
      for (const auto& row : overlaps[i]) {
        int best = -1;
        for (std::size_t g = 0; g < row.size(); ++g) {
          if (taken[g] || row[g] < t) continue;
          if (best < 0 || row[g] > row[best]) best = static_cast<int>(g);
        }
        if (best >= 0) {
          taken[best] = 1;
          ++matched;
        }
      }
    }
    sum += static_cast<double>(matched) / static_cast<double>(total_gt);
  }
  return sum / static_cast<double>(cfg.iou_thresholds.size());
}

std::vector<Detection> oracle_detections(
    std::span<const std::vector<Proposal>> proposals,
    std::span<const SceneImage> gts) {
  if (proposals.size() != gts.size()) {
    throw Error("oracle: one proposal list per image required");
  }
  std::vector<Detection> dets;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto matches = match_proposals(proposals[i], gts[i].objects, 0.5);
    for (std::size_t p = 0; p < matches.size(); ++p) {
      if (!matches[p].foreground()) continue;
      dets.push_back(Detection{gts[i].id, proposals[i][p].box, matches[p].label,
                               matches[p].iou});
    }
  }
  return dets;
}

EvalReport oracle_gt_label_eval(std::span<const std::vector<Proposal>> proposals,
                                std::span<const SceneImage> gts,
                                std::span<const Category> categories,
                                const EvalConfig& cfg) {
  return evaluate_detections(oracle_detections(proposals, gts), gts, categories,
                             cfg);
}

EvalReport evaluate_detections(std::span<const Detection> dets,
                               std::span<const SceneImage> gts,
                               std::span<const Category> categories,
                               const EvalConfig& cfg) {
  const auto aps =
      ap_per_category(dets, gts, static_cast<int>(categories.size()), cfg);
  return binned_report(aps, categories);
}

std::string report_csv(const EvalReport& report,
                       std::span<const Category> categories) {
  std::string out = "category_id,train_count,val_count,bin,ap\n";
  for (const auto& c : categories) {
    out += std::to_string(c.id) + "," + std::to_string(c.train_count) + "," +
           std::to_string(c.val_count) + "," + csv_field(bin_label(c.bin)) + ",";
    const auto& ap = report.per_category_ap.at(c.id);
    if (ap) out += fmt_double(*ap);
    out += "\n";
  }
  return out;
}

nlohmann::ordered_json report_summary_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["overall_ap"] = opt_json(report.overall_ap);
  auto bins = nlohmann::ordered_json::array();
  for (BinId b : kAllBins) {
    const int i = bin_index(b);
    nlohmann::ordered_json jb;
    jb["bin"] = bin_label(b);
    jb["ap"] = opt_json(report.per_bin_ap[i]);
    jb["class_count"] = report.per_bin_class_count[i];
    jb["total_classes"] = report.per_bin_total_classes[i];
    bins.push_back(std::move(jb));
  }
  j["bins"] = std::move(bins);
  j["ar_at_k"] = opt_json(report.ar_at_k);
  if (report.ar_at_k) j["proposal_k"] = report.proposal_k;
  return j;
}

void write_report(const EvalReport& report, std::span<const Category> categories,
                  const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / (name + ".csv"), std::ios::binary);
    if (!csv) throw Error("cannot write " + (dir / (name + ".csv")).string());
    csv << report_csv(report, categories);
  }
  std::ofstream js(dir / (name + ".json"), std::ios::binary);
  if (!js) throw Error("cannot write " + (dir / (name + ".json")).string());
  js << report_summary_json(report).dump(2) << "\n";
}

}  // namespace lvcal

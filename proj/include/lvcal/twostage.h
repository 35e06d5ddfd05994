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
#ifndef LVCAL_TWOSTAGE_H_
#define LVCAL_TWOSTAGE_H_

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "lvcal/geometry.h"
#include "lvcal/scores.h"
#include "lvcal/world.h"

namespace lvcal {

struct Detection {
  int image_id = 0;
  Box box;
  int category_id = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline constexpr int kBackgroundLabel = -1;
inline constexpr double kDefaultMatchIou = 0.5;

struct MatchResult {
  int label = kBackgroundLabel;  // category id or kBackgroundLabel
  std::optional<int> gt_index;   // set for foreground matches
  double iou = 0.0;              // overlap with the best GT

  bool foreground() const { return label != kBackgroundLabel; }
};

// Each proposal takes the label of its highest-IoU GT when that overlap
// reaches `iou_threshold`; ties go to the lower GT index.
std::vector<MatchResult> match_proposals(std::span<const Proposal> proposals,
                                         std::span<const GtObject> gts,
                                         double iou_threshold = kDefaultMatchIou);

// Greedy NMS over detections of one image and one category. Order is score
// descending, then x1, then y1, then input position.
std::vector<Detection> nms(std::span<const Detection> dets,
                           double iou_threshold);

struct DecodeConfig {
  double score_threshold = 0.05;
  double nms_iou = 0.5;
  int max_per_image = 300;  // <= 0 disables the cap
};

// Turns per-proposal class scores into detections: every foreground entry
// strictly above the threshold is a candidate, NMS runs per (image, class),
// and the top `max_per_image` by score survive per image. Output is grouped
// by image in order of first appearance, score descending within an image.
std::vector<Detection> decode_detections(std::span<const Proposal> proposals,
                                         const ScoreMatrix& scores,
                                         const DecodeConfig& cfg = {});

// Stable per-image cap by descending score; cap <= 0 keeps everything.
std::vector<Detection> cap_per_image(std::vector<Detection> dets, int cap);

// COCO-result-style records, one per line:
//   {"image_id":..,"category_id":..,"bbox":[x1,y1,x2,y2],"score":..}
void export_detections(std::span<const Detection> dets,
                       const std::filesystem::path& path);
std::string detections_to_json_text(std::span<const Detection> dets);
std::vector<Detection> import_detections(const std::filesystem::path& path);
// `source` names the input in diagnostics.
std::vector<Detection> parse_detections(const std::string& text,
                                        const std::string& source = "<input>");

}  // namespace lvcal

#endif  // LVCAL_TWOSTAGE_H_

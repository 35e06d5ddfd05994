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
#include "lvcal/twostage.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace lvcal {

namespace {

bool nms_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
  return a.box.y1 < b.box.y1;
}

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(
                 std::count(text.begin(), text.begin() + offset, '\n'));
}

// Byte offsets of the elements of a top-level JSON array. Assumes the text
// already parsed successfully.
std::vector<std::size_t> top_level_element_offsets(const std::string& text) {
  std::vector<std::size_t> offsets;
  int depth = 0;
  bool in_string = false;
  bool expect_element = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      if (ch == '\\') {
        ++i;
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    if (depth == 1 && expect_element && ch != ']') {
      offsets.push_back(i);
      expect_element = false;
    }
    switch (ch) {
      case '"':
        in_string = true;
        break;
      case '[':
      case '{':
        ++depth;
        if (depth == 1) expect_element = true;
        break;
      case ']':
      case '}':
        --depth;
        break;
      case ',':
        if (depth == 1) expect_element = true;
        break;
      default:
        break;
    }
  }
  return offsets;
}

}  // namespace

std::vector<MatchResult> match_proposals(std::span<const Proposal> proposals,
                                         std::span<const GtObject> gts,
                                         double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error("match_proposals: IoU threshold must lie in (0,1]");
  }
  std::vector<MatchResult> out(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    double best = 0.0;
    int best_idx = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = iou(proposals[i].box, gts[g].box);
      if (o > best) {
        best = o;
        best_idx = static_cast<int>(g);
      }
    }
    out[i].iou = best;
    if (best_idx >= 0 && best >= iou_threshold) {
      out[i].label = gts[best_idx].category_id;
      out[i].gt_index = best_idx;
    }
  }
  return out;
}

std::vector<Detection> nms(std::span<const Detection> dets,
                           double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return nms_before(dets[a], dets[b]);
  });
  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
          return iou(k.box, d.box) >= iou_threshold;
        });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> cap_per_image(std::vector<Detection> dets, int cap) {
  if (cap <= 0) return dets;
  std::map<int, std::vector<Detection>> by_image;
  std::vector<int> image_order;
  for (auto& d : dets) {
    auto [it, inserted] = by_image.try_emplace(d.image_id);
    if (inserted) image_order.push_back(d.image_id);
    it->second.push_back(d);
  }
  std::vector<Detection> out;
  for (int id : image_order) {
    auto& v = by_image[id];
    std::stable_sort(v.begin(), v.end(), [](const Detection& a, const Detection& b) {
      return a.score > b.score;
    });
    if (static_cast<int>(v.size()) > cap) v.resize(cap);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::vector<Detection> decode_detections(std::span<const Proposal> proposals,
                                         const ScoreMatrix& scores,
                                         const DecodeConfig& cfg) {
  if (scores.rows() != static_cast<Eigen::Index>(proposals.size())) {
    throw Error("decode_detections: " + std::to_string(scores.rows()) +
                " score rows for " + std::to_string(proposals.size()) +
                " proposals");
  }
  if (scores.values.cols() < 2) {
    throw Error("decode_detections: score matrix needs a background column");
  }
  const int num_fg = scores.num_foreground();

  std::vector<int> image_order;
  std::map<int, std::vector<std::size_t>> rows_by_image;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    auto [it, inserted] = rows_by_image.try_emplace(proposals[i].image_id);
    if (inserted) image_order.push_back(proposals[i].image_id);
    it->second.push_back(i);
  }

  std::vector<Detection> out;
  std::vector<Detection> candidates;
  for (int image_id : image_order) {
    const auto& rows = rows_by_image[image_id];
    std::vector<Detection> image_dets;
    for (int c = 0; c < num_fg; ++c) {
      candidates.clear();
      for (std::size_t r : rows) {
        const double s = scores.values(static_cast<Eigen::Index>(r), c);
        if (s > cfg.score_threshold) {
          candidates.push_back(Detection{image_id, proposals[r].box, c, s});
        }
      }
      if (candidates.empty()) continue;
      auto kept = nms(candidates, cfg.nms_iou);
      image_dets.insert(image_dets.end(), kept.begin(), kept.end());
    }
    std::stable_sort(image_dets.begin(), image_dets.end(),
                     [](const Detection& a, const Detection& b) {
                       return a.score > b.score;
                     });
    if (cfg.max_per_image > 0 &&
        static_cast<int>(image_dets.size()) > cfg.max_per_image) {
      image_dets.resize(cfg.max_per_image);
    }
    out.insert(out.end(), image_dets.begin(), image_dets.end());
  }
  return out;
}

std::string detections_to_json_text(std::span<const Detection> dets) {
  std::string text = "[\n";
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Detection& d = dets[i];
    nlohmann::ordered_json rec;
    rec["image_id"] = d.image_id;
    rec["category_id"] = d.category_id;
    rec["bbox"] = {d.box.x1, d.box.y1, d.box.x2, d.box.y2};
    rec["score"] = d.score;
    text += rec.dump();
    text += i + 1 < dets.size() ? ",\n" : "\n";
  }
  text += "]\n";
  return text;
}

void export_detections(std::span<const Detection> dets,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << detections_to_json_text(dets);
}

std::vector<Detection> parse_detections(const std::string& text,
                                        const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(source + ":" + std::to_string(line_of_offset(text, e.byte)) +
                ": invalid JSON: " + e.what());
  }
  if (!doc.is_array()) throw Error(source + ":1: expected an array of records");
  const auto offsets = top_level_element_offsets(text);

  std::vector<Detection> dets;
  dets.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const int line = i < offsets.size() ? line_of_offset(text, offsets[i]) : 0;
    auto fail = [&](const std::string& msg) {
      throw Error(source + ":" + std::to_string(line) + ": record " +
                  std::to_string(i) + ": " + msg);
    };
    const auto& rec = doc[i];
    if (!rec.is_object()) fail("not an object");
    for (const char* field : {"image_id", "category_id", "bbox", "score"}) {
      if (!rec.contains(field)) fail(std::string("missing field `") + field + "`");
    }
    if (!rec["image_id"].is_number_integer()) fail("`image_id` must be an integer");
    if (!rec["category_id"].is_number_integer()) {
      fail("`category_id` must be an integer");
    }
    const auto& bbox = rec["bbox"];
    if (!bbox.is_array() || bbox.size() != 4 ||
        !std::all_of(bbox.begin(), bbox.end(),
                     [](const auto& v) { return v.is_number(); })) {
      fail("`bbox` must be [x1,y1,x2,y2]");
    }
    if (!rec["score"].is_number()) fail("`score` must be a number");
    Detection d;
    d.image_id = rec["image_id"].get<int>();
    d.category_id = rec["category_id"].get<int>();
    d.box = Box{bbox[0].get<double>(), bbox[1].get<double>(),
                bbox[2].get<double>(), bbox[3].get<double>()};
    d.score = rec["score"].get<double>();
    if (!std::isfinite(d.score)) fail("`score` must be finite");
    if (d.category_id < 0) fail("`category_id` must be a foreground class");
    dets.push_back(d);
  }
  return dets;
}

std::vector<Detection> import_detections(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_detections(buf.str(), path.string());
}

}  // namespace lvcal

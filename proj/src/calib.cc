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
#include "lvcal/calib.h"

namespace lvcal {

namespace {

void check_same_shape(const ScoreMatrix& a, const ScoreMatrix& b) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols()) {
    throw Error("score matrices differ in shape: " +
                std::to_string(a.values.rows()) + "x" +
                std::to_string(a.values.cols()) + " vs " +
                std::to_string(b.values.rows()) + "x" +
                std::to_string(b.values.cols()));
  }
}

void check_split(const ScoreMatrix& m, const BinSplit& split) {
  if (split.num_categories() != m.num_foreground()) {
    throw Error("bin split covers " + std::to_string(split.num_categories()) +
                " categories, scores have " + std::to_string(m.num_foreground()));
  }
}

ScoreMatrix concatenate(const ScoreMatrix& orig, const Matrix& fresh,
                        const BinSplit& split) {
  ScoreMatrix out = orig;
  for (int c = 0; c < orig.num_foreground(); ++c) {
    if (split.is_tail(c)) out.values.col(c) = fresh.col(c);
  }
  return out;
}

ScoreMatrix mean_of(std::span<const ScoreMatrix> scores) {
  if (scores.empty()) throw Error("averaging needs at least one score matrix");
  for (const auto& s : scores) check_same_shape(scores.front(), s);
  if (scores.size() == 1) return scores.front();
  Matrix sum = scores.front().values;
  for (std::size_t i = 1; i < scores.size(); ++i) sum += scores[i].values;
  sum /= static_cast<double>(scores.size());
  return ScoreMatrix(std::move(sum));
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kOnly:
      return "only";
    case Strategy::kAvg:
      return "avg";
    case Strategy::kDet:
      return "det";
    case Strategy::kCat:
      return "cat";
    case Strategy::kCatThr:
      return "cat-thr";
    case Strategy::kCatScale:
      return "cat-scale";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (strategy_name(s) == name) return s;
  }
  throw Error("unknown strategy `" + std::string(name) +
              "` (expected only|avg|det|cat|cat-thr|cat-scale)");
}

BinSplit BinSplit::from_categories(std::span<const Category> categories,
                                   std::span<const BinId> tail_bins) {
  BinSplit split;
  split.tail.resize(categories.size(), 0);
  for (const auto& c : categories) {
    for (BinId b : tail_bins) {
      if (c.bin == b) split.tail[c.id] = 1;
    }
  }
  return split;
}

BinSplit BinSplit::default_split(std::span<const Category> categories) {
  constexpr std::array<BinId, 2> kTail = {BinId::kRare, BinId::kFew};
  return from_categories(categories, kTail);
}

double background_scale(const ScoreMatrix& orig, const ScoreMatrix& fresh,
                        bool invert) {
  check_same_shape(orig, fresh);
  if (orig.rows() == 0) throw Error("cat-scale: no proposals to average over");
  const double orig_bg = orig.values.col(orig.background_index()).mean();
  const double new_bg = fresh.values.col(fresh.background_index()).mean();
  const double num = invert ? new_bg : orig_bg;
  const double den = invert ? orig_bg : new_bg;
  if (den == 0.0) throw Error("cat-scale: zero mean background score");
  return num / den;
}

ScoreMatrix combine(Strategy strategy, const ScoreMatrix& orig,
                    const ScoreMatrix& fresh, const BinSplit& split,
                    const CombineOptions& options) {
  check_same_shape(orig, fresh);
  check_split(orig, split);
  switch (strategy) {
    case Strategy::kOnly:
      return fresh;
    case Strategy::kAvg: {
      const std::array<ScoreMatrix, 2> pair = {orig, fresh};
      return mean_of(pair);
    }
    case Strategy::kCat:
      return concatenate(orig, fresh.values, split);
    case Strategy::kCatThr: {
      Matrix filtered =
          (fresh.values.array() <= options.threshold).select(0.0, fresh.values);
      return concatenate(orig, filtered, split);
    }
    case Strategy::kCatScale: {
      const double k = background_scale(orig, fresh, options.invert_scale);
      if (k == 1.0) return concatenate(orig, fresh.values, split);
      Matrix scaled = fresh.values * k;
      return concatenate(orig, scaled, split);
    }
    case Strategy::kDet:
      throw Error("`det` combines detections, not scores; decode each head and "
                  "use combine_detections_det");
  }
  throw Error("unknown strategy");
}

std::vector<Detection> combine_detections_det(
    std::span<const Detection> dets_orig, std::span<const Detection> dets_new,
    const BinSplit& split, int per_image_cap) {
  auto valid = [&](int c) { return c >= 0 && c < split.num_categories(); };
  std::vector<Detection> merged;
  merged.reserve(dets_orig.size() + dets_new.size());
  for (const auto& d : dets_orig) {
    if (valid(d.category_id) && !split.is_tail(d.category_id)) merged.push_back(d);
  }
  for (const auto& d : dets_new) {
    if (valid(d.category_id) && split.is_tail(d.category_id)) merged.push_back(d);
  }
  return cap_per_image(std::move(merged), per_image_cap);
}

ScoreMatrix average_heads(std::span<const ScoreMatrix> scores) {
  return mean_of(scores);
}

ScoreMatrix ensemble_models(std::span<const ScoreMatrix> score_sets) {
  return mean_of(score_sets);
}

}  // namespace lvcal

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
#ifndef LVCAL_CALIB_H_
#define LVCAL_CALIB_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lvcal/scores.h"
#include "lvcal/twostage.h"
#include "lvcal/world.h"

namespace lvcal {

enum class Strategy { kOnly, kAvg, kDet, kCat, kCatThr, kCatScale };

// CLI names: only|avg|det|cat|cat-thr|cat-scale.
std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);
inline constexpr std::array<Strategy, 6> kAllStrategies = {
    Strategy::kOnly, Strategy::kAvg,    Strategy::kDet,
    Strategy::kCat,  Strategy::kCatThr, Strategy::kCatScale};

// Which foreground categories the retrained head answers for.
struct BinSplit {
  std::vector<char> tail;  // indexed by category id

  // Categories whose bin is in `tail_bins` go to the new head.
  static BinSplit from_categories(std::span<const Category> categories,
                                  std::span<const BinId> tail_bins);
  static BinSplit default_split(std::span<const Category> categories);

  int num_categories() const { return static_cast<int>(tail.size()); }
  bool is_tail(int category_id) const { return tail[category_id] != 0; }
};

struct CombineOptions {
  double threshold = 0.05;  // cat-thr: new entries <= threshold are zeroed
  bool invert_scale = false;  // cat-scale: use new_bg / orig_bg instead
};

// Score-level combination of the original and retrained heads. `det` is a
// detection-level strategy; use combine_detections_det for it.
ScoreMatrix combine(Strategy strategy, const ScoreMatrix& orig,
                    const ScoreMatrix& fresh, const BinSplit& split,
                    const CombineOptions& options = {});

// Multiplier applied to new-head foreground scores by cat-scale.
double background_scale(const ScoreMatrix& orig, const ScoreMatrix& fresh,
                        bool invert = false);

// Two-expert merge: original head's detections on many-shot classes, new
// head's on tail classes, then a joint per-image cap by score.
std::vector<Detection> combine_detections_det(
    std::span<const Detection> dets_orig, std::span<const Detection> dets_new,
    const BinSplit& split, int per_image_cap);

// Elementwise mean of same-shaped matrices (cascade stages).
ScoreMatrix average_heads(std::span<const ScoreMatrix> scores);
// Same contract across independently trained models.
ScoreMatrix ensemble_models(std::span<const ScoreMatrix> score_sets);

}  // namespace lvcal

#endif  // LVCAL_CALIB_H_

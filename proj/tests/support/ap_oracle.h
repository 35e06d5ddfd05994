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
// Brute-force AP reference used by the unit and acceptance suites. It shares
// no code with the evaluator: every score cutoff is rematched from scratch.
#ifndef LVCAL_TESTS_SUPPORT_AP_ORACLE_H_
#define LVCAL_TESTS_SUPPORT_AP_ORACLE_H_

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "lvcal/twostage.h"
#include "lvcal/world.h"

namespace lvcal::testing {

inline double overlap(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// True positives among the first `k` ranked detections.
inline long long oracle_tp(const std::vector<Detection>& ranked, std::size_t k,
                           std::span<const SceneImage> gts, int category,
                           double threshold) {
  struct Gt {
    int image;
    Box box;
    bool used;
  };
  std::vector<Gt> pool;
  for (const auto& img : gts) {
    for (const auto& o : img.objects) {
      if (o.category_id == category) pool.push_back({img.id, o.box, false});
    }
  }
  long long tp = 0;
  for (std::size_t i = 0; i < k; ++i) {
    int best = -1;
    for (std::size_t g = 0; g < pool.size(); ++g) {
      if (pool[g].used || pool[g].image != ranked[i].image_id) continue;
      const double o = overlap(pool[g].box, ranked[i].box);
      if (o < threshold) continue;
      if (best < 0 || o > overlap(pool[best].box, ranked[i].box)) best = static_cast<int>(g);
    }
    if (best >= 0) {
      pool[best].used = true;
      ++tp;
    }
  }
  return tp;
}

inline double oracle_ap(std::span<const Detection> dets,
                        std::span<const SceneImage> gts, int category,
                        double threshold, int recall_points = 101) {
  long long npos = 0;
  for (const auto& img : gts) {
    for (const auto& o : img.objects) npos += o.category_id == category;
  }
  if (npos == 0) return 0.0;
  std::vector<Detection> ranked;
  for (const auto& d : dets) {
    if (d.category_id == category) ranked.push_back(d);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<long long> tp(ranked.size() + 1, 0);
  for (std::size_t k = 1; k <= ranked.size(); ++k) {
    tp[k] = oracle_tp(ranked, k, gts, category, threshold);
  }
  double sum = 0.0;
  const long long steps = recall_points - 1;
  for (int j = 0; j < recall_points; ++j) {
    double best = 0.0;
    for (std::size_t k = 1; k <= ranked.size(); ++k) {
      // recall tp/npos >= j/steps
      if (tp[k] * steps >= static_cast<long long>(j) * npos) {
        best = std::max(best, static_cast<double>(tp[k]) / static_cast<double>(k));
      }
    }
    sum += best;
  }
  return sum / recall_points;
}

inline double oracle_ap_mean(std::span<const Detection> dets,
                             std::span<const SceneImage> gts, int category,
                             std::span<const double> thresholds) {
  double s = 0.0;
  for (double t : thresholds) s += oracle_ap(dets, gts, category, t);
  return s / static_cast<double>(thresholds.size());
}

// Random tiny instance: up to `max_gt` GTs and `max_det` detections over a
// few images and categories. Detections are perturbed copies of GTs or random
// boxes; scores are drawn from a small grid to produce ties.
struct TinyInstance {
  std::vector<SceneImage> gts;
  std::vector<Detection> dets;
  std::vector<double> thresholds;
  int num_categories = 0;
};

inline Box random_unit_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 0.7);
  std::uniform_real_distribution<double> s(0.1, 0.3);
  const double x = u(rng), y = u(rng);
  return Box{x, y, x + s(rng), y + s(rng)};
}

inline TinyInstance random_tiny_instance(std::mt19937_64& rng, int max_gt = 10,
                                         int max_det = 20) {
  TinyInstance inst;
  std::uniform_int_distribution<int> n_img(1, 3), n_cat(1, 3);
  inst.num_categories = n_cat(rng);
  const int images = n_img(rng);
  for (int i = 0; i < images; ++i) inst.gts.push_back(SceneImage{i, {}});
  std::uniform_int_distribution<int> n_gt(1, max_gt), n_det(0, max_det);
  std::uniform_int_distribution<int> pick_img(0, images - 1),
      pick_cat(0, inst.num_categories - 1);
  const int gts = n_gt(rng);
  for (int g = 0; g < gts; ++g) {
    inst.gts[pick_img(rng)].objects.push_back(GtObject{random_unit_box(rng), pick_cat(rng)});
  }
  std::vector<GtObject> flat;
  std::vector<int> flat_img;
  for (const auto& img : inst.gts) {
    for (const auto& o : img.objects) {
      flat.push_back(o);
      flat_img.push_back(img.id);
    }
  }
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  std::uniform_int_distribution<int> score_grid(0, 9);
  std::bernoulli_distribution near(0.7);
  const int dets = n_det(rng);
  for (int d = 0; d < dets; ++d) {
    Detection det;
    if (near(rng)) {
      std::uniform_int_distribution<std::size_t> pick(0, flat.size() - 1);
      const std::size_t g = pick(rng);
      Box b = flat[g].box;
      b.x1 += jitter(rng);
      b.y1 += jitter(rng);
      b.x2 += jitter(rng);
      b.y2 += jitter(rng);
      det.box = b;
      det.image_id = flat_img[g];
      det.category_id = flat[g].category_id;
    } else {
      det.box = random_unit_box(rng);
      det.image_id = pick_img(rng);
      det.category_id = pick_cat(rng);
    }
    det.score = 0.05 + 0.1 * score_grid(rng);
    inst.dets.push_back(det);
  }
  std::uniform_int_distribution<int> n_thr(1, 10);
  const int t = n_thr(rng);
  std::vector<int> pool(10);
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(t);
  std::sort(pool.begin(), pool.end());
  for (int i : pool) inst.thresholds.push_back((50 + 5 * i) / 100.0);
  return inst;
}

}  // namespace lvcal::testing

#endif  // LVCAL_TESTS_SUPPORT_AP_ORACLE_H_

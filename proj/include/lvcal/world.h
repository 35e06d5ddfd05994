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
#ifndef LVCAL_WORLD_H_
#define LVCAL_WORLD_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lvcal/common.h"
#include "lvcal/geometry.h"

namespace lvcal {

struct Category {
  int id = 0;
  int train_count = 0;
  // Validation instances; zero means absent from the validation split.
  int val_count = 0;
  BinId bin = BinId::kRare;

  bool in_val() const { return val_count > 0; }
};

struct GtObject {
  Box box;
  int category_id = 0;
};

struct SceneImage {
  int id = 0;
  std::vector<GtObject> objects;
};

// Simulated first-stage output. The feature is what the frozen backbone would
// pool for the box.
struct Proposal {
  Box box;
  Vector feature;
  double objectness = 0.0;
  int image_id = 0;
};

enum class Split { kTrain, kVal };

struct WorldConfig {
  int num_categories = 100;
  int feature_dim = 32;
  double zipf_exponent = 1.6;
  int total_instances = 20000;
  int min_objects_per_image = 1;
  int max_objects_per_image = 6;
  // Validation count per category: round(val_fraction * train) + val_min.
  double val_fraction = 0.25;
  int val_min_instances = 3;
  double recall_prob = 0.95;
  double box_jitter = 0.08;
  double min_box_size = 0.1;
  double max_box_size = 0.3;
  int background_per_image = 40;
  double feature_noise = 10.0;
  // Localization-independent share of the feature noise.
  double noise_floor = 0.0;
  // Prototype c = sqrt(1-rho) z_c + sqrt(rho) g_(c mod groups); 0 groups
  // keeps categories independent.
  int prototype_groups = 10;
  double group_correlation = 0.75;
  std::uint64_t seed = 0;

  // Throws Error describing the first violated constraint.
  void validate() const;
};

struct World {
  WorldConfig config;
  std::vector<Category> categories;
  Matrix prototypes;  // C x D
  std::vector<SceneImage> train_images;
  std::vector<SceneImage> val_images;

  int num_categories() const { return static_cast<int>(categories.size()); }
  int feature_dim() const { return static_cast<int>(prototypes.cols()); }
  const std::vector<SceneImage>& images(Split split) const {
    return split == Split::kTrain ? train_images : val_images;
  }
  std::vector<int> train_counts() const;
};

// Zipf allocation of `total` instances over `num_categories` ranks: rank r
// gets round(total * r^-s / sum), floored at one, remainder to rank 1.
// Entry i is the count of rank i+1.
std::vector<int> sample_counts(int num_categories, double exponent, int total);

BinId assign_bin(int train_count);

// Number of categories per bin.
std::array<int, kNumBins> bin_sizes(const std::vector<int>& counts);

World generate_world(const WorldConfig& cfg);

// Feature of a proposal covering an object of `category_id` at overlap `iou`:
// prototype + feature_noise * (noise_floor + 1 - iou) * z, z standard normal.
Vector object_feature(const World& world, int category_id, double overlap,
                      Rng& rng);

std::vector<Proposal> generate_proposals(const SceneImage& image,
                                         const World& world, Rng& rng);

// The frozen first stage: proposals for an image come from a stream keyed by
// (seed, split, image id), so every caller sees the same set.
Rng proposal_rng(const World& world, Split split, int image_id);
std::vector<Proposal> frozen_proposals(const World& world, Split split,
                                       const SceneImage& image);
std::vector<std::vector<Proposal>> frozen_proposals(const World& world,
                                                    Split split);

nlohmann::json world_config_to_json(const WorldConfig& cfg);
WorldConfig world_config_from_json(const nlohmann::json& j);
nlohmann::json world_to_json(const World& world);
World world_from_json(const nlohmann::json& j);
void save_world(const World& world, const std::filesystem::path& path);
World load_world(const std::filesystem::path& path);

// Reads `category_id,count` rows; a non-numeric first line is a header.
std::vector<std::pair<int, int>> read_count_file(
    const std::filesystem::path& path);

}  // namespace lvcal

#endif  // LVCAL_WORLD_H_

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
#include "lvcal/world.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lvcal {

namespace {

Box random_box(const WorldConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> size(cfg.min_box_size,
                                              cfg.max_box_size);
  const double w = size(rng);
  const double h = size(rng);
  std::uniform_real_distribution<double> px(0.0, 1.0 - w);
  std::uniform_real_distribution<double> py(0.0, 1.0 - h);
  const double x1 = px(rng);
  const double y1 = py(rng);
  return Box{x1, y1, x1 + w, y1 + h};
}

// Keeps the box inside the unit scene with a strictly positive extent.
Box clamp_box(Box b) {
  constexpr double kMinExtent = 1e-3;
  b.x1 = std::clamp(b.x1, 0.0, 1.0 - kMinExtent);
  b.y1 = std::clamp(b.y1, 0.0, 1.0 - kMinExtent);
  b.x2 = std::clamp(b.x2, b.x1 + kMinExtent, 1.0);
  b.y2 = std::clamp(b.y2, b.y1 + kMinExtent, 1.0);
  return b;
}

Box jitter_box(const Box& gt, double scale, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double w = gt.width();
  const double h = gt.height();
  Box b;
  b.x1 = gt.x1 + scale * w * n(rng);
  b.y1 = gt.y1 + scale * h * n(rng);
  b.x2 = gt.x2 + scale * w * n(rng);
  b.y2 = gt.y2 + scale * h * n(rng);
  if (b.x2 < b.x1) std::swap(b.x1, b.x2);
  if (b.y2 < b.y1) std::swap(b.y1, b.y2);
  return clamp_box(b);
}

Vector standard_normal(int dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n(rng);
  return v;
}

std::vector<SceneImage> layout_images(const WorldConfig& cfg,
                                      const std::vector<int>& counts,
                                      Rng& rng) {
  std::vector<int> labels;
  for (int c = 0; c < static_cast<int>(counts.size()); ++c) {
    labels.insert(labels.end(), counts[c], c);
  }
  std::shuffle(labels.begin(), labels.end(), rng);

  std::uniform_int_distribution<int> per_image(cfg.min_objects_per_image,
                                               cfg.max_objects_per_image);
  std::vector<SceneImage> images;
  std::size_t next = 0;
  while (next < labels.size()) {
    const auto n = std::min<std::size_t>(per_image(rng), labels.size() - next);
    SceneImage img;
    img.id = static_cast<int>(images.size());
    for (std::size_t k = 0; k < n; ++k) {
      img.objects.push_back(GtObject{random_box(cfg, rng), labels[next + k]});
    }
    next += n;
    images.push_back(std::move(img));
  }
  return images;
}

nlohmann::json box_to_json(const Box& b) {
  return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2});
}

Box box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw Error("box must be [x1,y1,x2,y2]");
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
             j[3].get<double>()};
}

nlohmann::json images_to_json(const std::vector<SceneImage>& images) {
  auto out = nlohmann::json::array();
  for (const auto& img : images) {
    auto objs = nlohmann::json::array();
    for (const auto& o : img.objects) {
      objs.push_back({{"box", box_to_json(o.box)},
                      {"category_id", o.category_id}});
    }
    out.push_back({{"id", img.id}, {"objects", std::move(objs)}});
  }
  return out;
}

std::vector<SceneImage> images_from_json(const nlohmann::json& j) {
  std::vector<SceneImage> images;
  for (const auto& ji : j) {
    SceneImage img;
    img.id = ji.at("id").get<int>();
    for (const auto& jo : ji.at("objects")) {
      img.objects.push_back(GtObject{box_from_json(jo.at("box")),
                                     jo.at("category_id").get<int>()});
    }
    images.push_back(std::move(img));
  }
  return images;
}

void check_images(const World& world, const std::vector<SceneImage>& images) {
  for (const auto& img : images) {
    for (const auto& o : img.objects) {
      if (o.category_id < 0 || o.category_id >= world.num_categories()) {
        throw Error("image " + std::to_string(img.id) +
                    " references unknown category " +
                    std::to_string(o.category_id));
      }
      if (!o.box.valid()) {
        throw Error("image " + std::to_string(img.id) + " has a degenerate box");
      }
    }
  }
}

}  // namespace

void WorldConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error("world config: " + msg); };
  if (num_categories < 1) fail("num_categories must be >= 1");
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (!(zipf_exponent >= 0.0) || !std::isfinite(zipf_exponent)) {
    fail("zipf_exponent must be finite and >= 0");
  }
  if (total_instances < num_categories) {
    fail("total_instances must be >= num_categories");
  }
  if (min_objects_per_image < 1 ||
      max_objects_per_image < min_objects_per_image) {
    fail("objects_per_image range must satisfy 1 <= min <= max");
  }
  if (!(val_fraction >= 0.0) || val_min_instances < 0) {
    fail("validation counts must be non-negative");
  }
  if (!(recall_prob >= 0.0 && recall_prob <= 1.0)) {
    fail("recall_prob must lie in [0,1]");
  }
  if (!(box_jitter >= 0.0)) fail("box_jitter must be >= 0");
  if (!(min_box_size > 0.0 && max_box_size >= min_box_size &&
        max_box_size < 1.0)) {
    fail("box size range must satisfy 0 < min <= max < 1");
  }
  if (background_per_image < 0) fail("background_per_image must be >= 0");
  if (!(feature_noise >= 0.0)) fail("feature_noise must be >= 0");
  if (!(noise_floor >= 0.0)) fail("noise_floor must be >= 0");
  if (prototype_groups < 0) fail("prototype_groups must be >= 0");
  if (!(group_correlation >= 0.0 && group_correlation < 1.0)) {
    fail("group_correlation must be in [0, 1)");
  }
}

std::vector<int> World::train_counts() const {
  std::vector<int> out;
  out.reserve(categories.size());
  for (const auto& c : categories) out.push_back(c.train_count);
  return out;
}

std::vector<int> sample_counts(int num_categories, double exponent,
                               int total) {
  if (num_categories < 1) throw Error("sample_counts: need >= 1 category");
  if (total < num_categories) {
    throw Error("sample_counts: total must be >= number of categories");
  }
  if (!(exponent >= 0.0)) throw Error("sample_counts: exponent must be >= 0");

  std::vector<double> mass(num_categories);
  double norm = 0.0;
  for (int r = 1; r <= num_categories; ++r) {
    mass[r - 1] = std::pow(static_cast<double>(r), -exponent);
    norm += mass[r - 1];
  }
  std::vector<int> counts(num_categories);
  long long assigned = 0;
  for (int i = 0; i < num_categories; ++i) {
    const auto c = static_cast<int>(std::llround(total * mass[i] / norm));
    counts[i] = std::max(1, c);
    assigned += counts[i];
  }
  counts[0] += static_cast<int>(total - assigned);
  // Flooring at one can over-assign past what rank 1 can absorb; take the
  // excess from the largest remaining ranks.
  for (int i = 1; counts[0] < 1 && i < num_categories; ++i) {
    const int take = std::min(counts[i] - 1, 1 - counts[0]);
    counts[i] -= take;
    counts[0] += take;
  }
  return counts;
}

BinId assign_bin(int train_count) {
  if (train_count < 0) throw Error("assign_bin: negative instance count");
  if (train_count < 10) return BinId::kRare;
  if (train_count < 100) return BinId::kFew;
  if (train_count < 1000) return BinId::kMedium;
  return BinId::kFrequent;
}

std::array<int, kNumBins> bin_sizes(const std::vector<int>& counts) {
  std::array<int, kNumBins> sizes{};
  for (int c : counts) ++sizes[bin_index(assign_bin(c))];
  return sizes;
}

World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  World world;
  world.config = cfg;

  const auto counts =
      sample_counts(cfg.num_categories, cfg.zipf_exponent, cfg.total_instances);
  std::vector<int> val_counts(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const auto v = std::llround(cfg.val_fraction * counts[c]);
    val_counts[c] = static_cast<int>(v) + cfg.val_min_instances;
    world.categories.push_back(Category{static_cast<int>(c), counts[c],
                                        val_counts[c], assign_bin(counts[c])});
  }

  Rng proto_rng = derive_rng(cfg.seed, "prototypes");
  world.prototypes.resize(cfg.num_categories, cfg.feature_dim);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int c = 0; c < cfg.num_categories; ++c) {
    for (int d = 0; d < cfg.feature_dim; ++d) world.prototypes(c, d) = n(proto_rng);
  }
  if (cfg.prototype_groups > 0 && cfg.group_correlation > 0.0) {
    // Category c shares a direction with every category of the same rank
    // residue, so frequent and rare categories end up as look-alikes.
    Rng group_rng = derive_rng(cfg.seed, "prototype_groups");
    Matrix shared(cfg.prototype_groups, cfg.feature_dim);
    for (int g = 0; g < cfg.prototype_groups; ++g) {
      for (int d = 0; d < cfg.feature_dim; ++d) shared(g, d) = n(group_rng);
    }
    const double own = std::sqrt(1.0 - cfg.group_correlation);
    const double common = std::sqrt(cfg.group_correlation);
    for (int c = 0; c < cfg.num_categories; ++c) {
      world.prototypes.row(c) =
          own * world.prototypes.row(c) + common * shared.row(c % cfg.prototype_groups);
    }
  }

  Rng train_rng = derive_rng(cfg.seed, "train_layout");
  world.train_images = layout_images(cfg, counts, train_rng);
  Rng val_rng = derive_rng(cfg.seed, "val_layout");
  world.val_images = layout_images(cfg, val_counts, val_rng);
  return world;
}

Vector object_feature(const World& world, int category_id, double overlap,
                      Rng& rng) {
  const double scale =
      world.config.feature_noise * (world.config.noise_floor + 1.0 - overlap);
  Vector f = world.prototypes.row(category_id).transpose();
  f += scale * standard_normal(world.feature_dim(), rng);
  return f;
}

std::vector<Proposal> generate_proposals(const SceneImage& image,
                                         const World& world, Rng& rng) {
  const WorldConfig& cfg = world.config;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Proposal> out;
  out.reserve(image.objects.size() + cfg.background_per_image);

  auto best_overlap = [&](const Box& b) {
    double best = 0.0;
    for (const auto& o : image.objects) best = std::max(best, iou(b, o.box));
    return best;
  };

  for (const auto& gt : image.objects) {
    if (u01(rng) >= cfg.recall_prob) continue;
    Proposal p;
    p.box = jitter_box(gt.box, cfg.box_jitter, rng);
    p.feature = object_feature(world, gt.category_id, iou(p.box, gt.box), rng);
    p.objectness = best_overlap(p.box);
    p.image_id = image.id;
    out.push_back(std::move(p));
  }
  for (int k = 0; k < cfg.background_per_image; ++k) {
    Proposal p;
    p.box = random_box(cfg, rng);
    p.feature = standard_normal(world.feature_dim(), rng);
    p.objectness = 0.2 * u01(rng);
    p.image_id = image.id;
    out.push_back(std::move(p));
  }
  return out;
}

Rng proposal_rng(const World& world, Split split, int image_id) {
  return derive_rng(world.config.seed,
                    split == Split::kTrain ? "proposals/train" : "proposals/val",
                    static_cast<std::uint64_t>(image_id));
}

std::vector<Proposal> frozen_proposals(const World& world, Split split,
                                       const SceneImage& image) {
  Rng rng = proposal_rng(world, split, image.id);
  return generate_proposals(image, world, rng);
}

std::vector<std::vector<Proposal>> frozen_proposals(const World& world,
                                                    Split split) {
  std::vector<std::vector<Proposal>> out;
  out.reserve(world.images(split).size());
  for (const auto& img : world.images(split)) {
    out.push_back(frozen_proposals(world, split, img));
  }
  return out;
}

nlohmann::json world_config_to_json(const WorldConfig& cfg) {
  return {{"num_categories", cfg.num_categories},
          {"feature_dim", cfg.feature_dim},
          {"zipf_exponent", cfg.zipf_exponent},
          {"total_instances", cfg.total_instances},
          {"min_objects_per_image", cfg.min_objects_per_image},
          {"max_objects_per_image", cfg.max_objects_per_image},
          {"val_fraction", cfg.val_fraction},
          {"val_min_instances", cfg.val_min_instances},
          {"recall_prob", cfg.recall_prob},
          {"box_jitter", cfg.box_jitter},
          {"min_box_size", cfg.min_box_size},
          {"max_box_size", cfg.max_box_size},
          {"background_per_image", cfg.background_per_image},
          {"feature_noise", cfg.feature_noise},
          {"noise_floor", cfg.noise_floor},
          {"prototype_groups", cfg.prototype_groups},
          {"group_correlation", cfg.group_correlation},
          {"seed", cfg.seed}};
}

WorldConfig world_config_from_json(const nlohmann::json& j) {
  WorldConfig cfg;
  cfg.num_categories = j.at("num_categories").get<int>();
  cfg.feature_dim = j.at("feature_dim").get<int>();
  cfg.zipf_exponent = j.at("zipf_exponent").get<double>();
  cfg.total_instances = j.at("total_instances").get<int>();
  cfg.min_objects_per_image = j.at("min_objects_per_image").get<int>();
  cfg.max_objects_per_image = j.at("max_objects_per_image").get<int>();
  cfg.val_fraction = j.at("val_fraction").get<double>();
  cfg.val_min_instances = j.at("val_min_instances").get<int>();
  cfg.recall_prob = j.at("recall_prob").get<double>();
  cfg.box_jitter = j.at("box_jitter").get<double>();
  cfg.min_box_size = j.at("min_box_size").get<double>();
  cfg.max_box_size = j.at("max_box_size").get<double>();
  cfg.background_per_image = j.at("background_per_image").get<int>();
  cfg.feature_noise = j.at("feature_noise").get<double>();
  cfg.noise_floor = j.at("noise_floor").get<double>();
  cfg.prototype_groups = j.at("prototype_groups").get<int>();
  cfg.group_correlation = j.at("group_correlation").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

nlohmann::json world_to_json(const World& world) {
  auto cats = nlohmann::json::array();
  for (const auto& c : world.categories) {
    cats.push_back({{"id", c.id},
                    {"train_count", c.train_count},
                    {"val_count", c.val_count}});
  }
  auto protos = nlohmann::json::array();
  for (Eigen::Index r = 0; r < world.prototypes.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index d = 0; d < world.prototypes.cols(); ++d) {
      row.push_back(world.prototypes(r, d));
    }
    protos.push_back(std::move(row));
  }
  return {{"config", world_config_to_json(world.config)},
          {"categories", std::move(cats)},
          {"prototypes", std::move(protos)},
          {"train_images", images_to_json(world.train_images)},
          {"val_images", images_to_json(world.val_images)}};
}

World world_from_json(const nlohmann::json& j) {
  World world;
  try {
    world.config = world_config_from_json(j.at("config"));
    for (const auto& jc : j.at("categories")) {
      Category c;
      c.id = jc.at("id").get<int>();
      c.train_count = jc.at("train_count").get<int>();
      c.val_count = jc.at("val_count").get<int>();
      c.bin = assign_bin(c.train_count);
      if (c.id != static_cast<int>(world.categories.size())) {
        throw Error("category ids must be dense and ordered");
      }
      world.categories.push_back(c);
    }
    const auto& jp = j.at("prototypes");
    const auto rows = static_cast<Eigen::Index>(jp.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(jp[0].size()) : 0;
    world.prototypes.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (static_cast<Eigen::Index>(jp[r].size()) != cols) {
        throw Error("prototype rows must share one dimension");
      }
      for (Eigen::Index d = 0; d < cols; ++d) {
        world.prototypes(r, d) = jp[r][d].get<double>();
      }
    }
    world.train_images = images_from_json(j.at("train_images"));
    world.val_images = images_from_json(j.at("val_images"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed world document: ") + e.what());
  }
  if (world.prototypes.rows() != world.num_categories()) {
    throw Error("world document: one prototype per category required");
  }
  check_images(world, world.train_images);
  check_images(world, world.val_images);
  std::vector<int> seen(world.categories.size(), 0);
  for (const auto& img : world.train_images) {
    for (const auto& o : img.objects) ++seen[o.category_id];
  }
  for (const auto& c : world.categories) {
    if (seen[c.id] != c.train_count) {
      throw Error("world document: category " + std::to_string(c.id) +
                  " train_count disagrees with its annotations");
    }
  }
  return world;
}

void save_world(const World& world, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << world_to_json(world).dump() << "\n";
}

World load_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return world_from_json(j);
}

std::vector<std::pair<int, int>> read_count_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<std::pair<int, int>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
    if (comma == std::string::npos) {
      throw Error(where() + ": expected `category_id,count`");
    }
    std::size_t used_id = 0, used_count = 0;
    int id = 0, count = 0;
    try {
      const std::string a = line.substr(0, comma);
      const std::string b = line.substr(comma + 1);
      id = std::stoi(a, &used_id);
      count = std::stoi(b, &used_count);
      if (a.find_first_not_of(" \t", used_id) != std::string::npos ||
          b.find_first_not_of(" \t", used_count) != std::string::npos) {
        throw std::invalid_argument("trailing characters");
      }
    } catch (const std::exception&) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw Error(where() + ": non-integer field");
    }
    if (count < 0) throw Error(where() + ": negative count");
    rows.emplace_back(id, count);
  }
  return rows;
}

}  // namespace lvcal

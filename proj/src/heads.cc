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
#include "lvcal/heads.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "lvcal/twostage.h"

namespace lvcal {

namespace {

void row_softmax(Matrix& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

void check_features(const Head& head, const Matrix& features) {
  if (features.cols() != head.feature_dim()) {
    throw Error("feature dimension " + std::to_string(features.cols()) +
                " does not match head dimension " +
                std::to_string(head.feature_dim()));
  }
}

// Stacks the rows of the selected images.
void gather_batch(const TrainingSet& data, std::span<const int> images,
                  Matrix& features, std::vector<int>& labels) {
  Eigen::Index rows = 0;
  for (int i : images) rows += data.features[i].rows();
  const Eigen::Index dim = data.features.empty() ? 0 : data.features[0].cols();
  features.resize(rows, dim);
  labels.clear();
  Eigen::Index at = 0;
  for (int i : images) {
    const Matrix& f = data.features[i];
    if (f.rows() == 0) continue;
    features.middleRows(at, f.rows()) = f;
    at += f.rows();
    labels.insert(labels.end(), data.labels[i].begin(), data.labels[i].end());
  }
}

int column_of(const MatchResult& m, int num_foreground) {
  return m.foreground() ? m.label : num_foreground;
}

TrainingSet training_set_from_proposals(const World& world,
                                        double iou_threshold, bool include_gt) {
  TrainingSet data;
  data.num_foreground = world.num_categories();
  const int dim = world.feature_dim();
  for (const auto& img : world.train_images) {
    const auto props = frozen_proposals(world, Split::kTrain, img);
    const auto matches = match_proposals(props, img.objects, iou_threshold);
    const std::size_t n_gt = include_gt ? img.objects.size() : 0;
    Matrix f(static_cast<Eigen::Index>(props.size() + n_gt), dim);
    std::vector<int> labels(props.size() + n_gt);
    for (std::size_t p = 0; p < props.size(); ++p) {
      f.row(static_cast<Eigen::Index>(p)) = props[p].feature.transpose();
      labels[p] = column_of(matches[p], data.num_foreground);
    }
    Rng gt_rng = derive_rng(world.config.seed, "gt_features", img.id);
    for (std::size_t g = 0; g < n_gt; ++g) {
      const int c = img.objects[g].category_id;
      const auto row = static_cast<Eigen::Index>(props.size() + g);
      f.row(row) = object_feature(world, c, 1.0, gt_rng).transpose();
      labels[props.size() + g] = c;
    }
    data.features.push_back(std::move(f));
    data.labels.push_back(std::move(labels));
  }
  return data;
}

}  // namespace

BalancedSampler::BalancedSampler(const World& world,
                                 const BalancedSamplerConfig& cfg)
    : world_(world),
      cfg_(cfg),
      data_(training_set_from_proposals(world, cfg.iou_threshold, false)),
      images_of_class_(world.num_categories()) {
  cfg.validate();
  for (const auto& img : world.train_images) {
    for (const auto& o : img.objects) {
      auto& v = images_of_class_[o.category_id];
      if (v.empty() || v.back() != img.id) v.push_back(img.id);
    }
  }
  for (int c = 0; c < world.num_categories(); ++c) {
    if (images_of_class_[c].empty()) {
      throw Error("balanced sampling: category " + std::to_string(c) +
                  " has no training image");
    }
  }
}

LabeledBatch BalancedSampler::sample(Rng& rng) const {
  const int num_classes = world_.num_categories();
  const int k = std::min(cfg_.classes_per_step, num_classes);
  std::vector<int> classes(num_classes);
  std::iota(classes.begin(), classes.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, num_classes - 1);
    std::swap(classes[i], classes[pick(rng)]);
  }
  classes.resize(k);
  std::vector<char> wanted(num_classes, 0);
  for (int c : classes) wanted[c] = 1;

  std::vector<int> images;
  for (int c : classes) {
    std::vector<int> pool = images_of_class_[c];
    const int n = std::min<int>(cfg_.images_per_class, pool.size());
    for (int i = 0; i < n; ++i) {
      std::uniform_int_distribution<int> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      images.push_back(pool[i]);
    }
  }
  std::sort(images.begin(), images.end());
  images.erase(std::unique(images.begin(), images.end()), images.end());

  const int bg = num_classes;
  std::vector<Vector> rows;
  std::vector<int> labels;
  std::vector<Vector> background;
  for (int id : images) {
    const Matrix& f = data_.features[id];
    const auto& l = data_.labels[id];
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      const int label = l[r];
      if (label == bg) {
        if (cfg_.include_background) background.push_back(f.row(r).transpose());
      } else if (wanted[label]) {
        rows.push_back(f.row(r).transpose());
        labels.push_back(label);
      }
    }
    for (const auto& o : world_.train_images[id].objects) {
      if (!wanted[o.category_id]) continue;
      rows.push_back(object_feature(world_, o.category_id, 1.0, rng));
      labels.push_back(o.category_id);
    }
  }
  if (cfg_.include_background && !background.empty()) {
    const auto quota = static_cast<std::size_t>(
        std::floor(cfg_.background_ratio * static_cast<double>(rows.size())));
    const std::size_t n = std::min(quota, background.size());
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, background.size() - 1);
      std::swap(background[i], background[pick(rng)]);
      rows.push_back(background[i]);
      labels.push_back(bg);
    }
  }

  LabeledBatch batch;
  batch.features.resize(static_cast<Eigen::Index>(rows.size()),
                        world_.feature_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    batch.features.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  batch.labels = std::move(labels);
  batch.sampled_classes = std::move(classes);
  return batch;
}

std::vector<int> Head::class_order() const {
  std::vector<int> order(num_foreground());
  std::iota(order.begin(), order.end(), 0);
  order.push_back(-1);
  return order;
}

Gradient Gradient::zeros_like(const Head& head) {
  return Gradient{Matrix::Zero(head.weights.rows(), head.weights.cols()),
                  Vector::Zero(head.biases.size())};
}

Head init_head(int num_foreground, int feature_dim, double scale, Rng& rng) {
  std::normal_distribution<double> n(0.0, scale);
  Head head;
  head.weights.resize(num_foreground + 1, feature_dim);
  for (Eigen::Index r = 0; r < head.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < head.weights.cols(); ++c) {
      head.weights(r, c) = n(rng);
    }
  }
  head.biases = Vector::Zero(num_foreground + 1);
  return head;
}

ScoreMatrix forward(const Head& head, const Matrix& features) {
  check_features(head, features);
  Matrix logits = features * head.weights.transpose();
  logits.rowwise() += head.biases.transpose();
  row_softmax(logits);
  return ScoreMatrix(std::move(logits));
}

double cross_entropy(const Head& head, const Matrix& features,
                     std::span<const int> labels, Gradient* grad) {
  check_features(head, features);
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw Error("cross_entropy: one label per feature row required");
  }
  const Eigen::Index n = features.rows();
  if (grad != nullptr) *grad = Gradient::zeros_like(head);
  if (n == 0) return 0.0;

  Matrix logits = features * head.weights.transpose();
  logits.rowwise() += head.biases.transpose();
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    auto row = logits.row(r);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    const int y = labels[r];
    if (y < 0 || y > head.num_foreground()) {
      throw Error("cross_entropy: label out of range");
    }
    loss += lse - row(y);
    row = (row.array() - lse).exp().matrix();  // probabilities
    row(y) -= 1.0;
  }
  if (grad != nullptr) {
    logits /= static_cast<double>(n);
    grad->weights = logits.transpose() * features;
    grad->biases = logits.colwise().sum().transpose();
  }
  return loss / static_cast<double>(n);
}

void sgd_step(Head& head, const Gradient& grad, double lr, double momentum,
              Gradient& velocity) {
  if (grad.weights.rows() != head.weights.rows() ||
      grad.weights.cols() != head.weights.cols() ||
      grad.biases.size() != head.biases.size()) {
    throw Error("sgd_step: gradient shape does not match head");
  }
  if (!grad.weights.allFinite() || !grad.biases.allFinite()) {
    throw Error("sgd_step: non-finite gradient; training diverged");
  }
  if (velocity.weights.size() == 0) velocity = Gradient::zeros_like(head);
  velocity.weights = momentum * velocity.weights + grad.weights;
  velocity.biases = momentum * velocity.biases + grad.biases;
  head.weights -= lr * velocity.weights;
  head.biases -= lr * velocity.biases;
}

void TrainSchedule::validate() const {
  if (epochs < 1) throw Error("schedule: epochs must be >= 1");
  if (stages.empty() || stages.front().start_epoch != 0) {
    throw Error("schedule: first stage must start at epoch 0");
  }
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (!(stages[i].learning_rate > 0.0)) {
      throw Error("schedule: learning rates must be positive");
    }
    if (i > 0 && stages[i].start_epoch <= stages[i - 1].start_epoch) {
      throw Error("schedule: stage boundaries must be strictly increasing");
    }
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error("schedule: momentum must lie in [0,1)");
  }
  if (minibatch_size < 1) throw Error("schedule: minibatch_size must be >= 1");
  if (!(init_scale >= 0.0)) throw Error("schedule: init_scale must be >= 0");
}

double TrainSchedule::lr_at(int epoch) const {
  double lr = stages.front().learning_rate;
  for (const auto& s : stages) {
    if (epoch >= s.start_epoch) lr = s.learning_rate;
  }
  return lr;
}

void BalancedSamplerConfig::validate() const {
  if (classes_per_step < 1 || images_per_class < 1) {
    throw Error("balanced sampler: classes_per_step and images_per_class must "
                "be positive");
  }
  if (!(background_ratio >= 0.0)) {
    throw Error("balanced sampler: background_ratio must be >= 0");
  }
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw Error("balanced sampler: iou_threshold must lie in (0,1)");
  }
}

TrainingSet build_training_set(const World& world, double iou_threshold,
                               bool include_gt) {
  return training_set_from_proposals(world, iou_threshold, include_gt);
}

std::vector<int> epoch_image_order(std::span<const double> factors, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<int> order;
  order.reserve(factors.size());
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const double whole = std::floor(factors[i]);
    const double frac = factors[i] - whole;
    int copies = static_cast<int>(whole);
    if (frac > 0.0 && u01(rng) < frac) ++copies;
    order.insert(order.end(), copies, static_cast<int>(i));
  }
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Head train_with_image_factors(const World& world, const TrainingSet& data,
                              std::span<const double> factors,
                              const TrainSchedule& schedule, Rng& rng) {
  schedule.validate();
  if (factors.size() != data.features.size()) {
    throw Error("one repeat factor per training image required");
  }
  Head head = init_head(world.num_categories(), world.feature_dim(),
                        schedule.init_scale, rng);
  Gradient velocity = Gradient::zeros_like(head);
  Gradient grad;
  Matrix features;
  std::vector<int> labels;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    const double lr = schedule.lr_at(epoch);
    const auto order = epoch_image_order(factors, rng);
    for (std::size_t start = 0; start < order.size();
         start += schedule.minibatch_size) {
      const std::size_t end =
          std::min(order.size(), start + schedule.minibatch_size);
      gather_batch(data, std::span(order).subspan(start, end - start), features,
                   labels);
      if (features.rows() == 0) continue;
      cross_entropy(head, features, labels, &grad);
      sgd_step(head, grad, lr, schedule.momentum, velocity);
    }
  }
  return head;
}

Head train_standard(const World& world, const TrainSchedule& schedule,
                    Rng& rng) {
  const TrainingSet data = build_training_set(world);
  const std::vector<double> ones(data.features.size(), 1.0);
  return train_with_image_factors(world, data, ones, schedule, rng);
}

LabeledBatch sample_balanced_batch(const World& world,
                                   const BalancedSamplerConfig& cfg, Rng& rng) {
  return BalancedSampler(world, cfg).sample(rng);
}

Head train_balanced(const World& world, const std::optional<Head>& base,
                    const BalancedSamplerConfig& cfg,
                    const TrainSchedule& schedule, Rng& rng) {
  schedule.validate();
  const BalancedSampler sampler(world, cfg);
  const int num_fg = base ? base->num_foreground() : world.num_categories();
  const int dim = base ? base->feature_dim() : world.feature_dim();
  if (num_fg != world.num_categories() || dim != world.feature_dim()) {
    throw Error("train_balanced: base head shape does not match the world");
  }
  int steps_per_epoch = cfg.steps_per_epoch;
  if (steps_per_epoch <= 0) {
    const auto n = static_cast<int>(world.train_images.size());
    steps_per_epoch = (n + schedule.minibatch_size - 1) / schedule.minibatch_size;
  }

  Head head = init_head(num_fg, dim, schedule.init_scale, rng);
  Gradient velocity = Gradient::zeros_like(head);
  Gradient grad;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    const double lr = schedule.lr_at(epoch);
    for (int step = 0; step < steps_per_epoch; ++step) {
      const LabeledBatch batch = sampler.sample(rng);
      if (batch.features.rows() == 0) continue;
      cross_entropy(head, batch.features, batch.labels, &grad);
      sgd_step(head, grad, lr, schedule.momentum, velocity);
    }
  }
  return head;
}

std::vector<double> repeat_factors(std::span<const int> counts, double t) {
  if (!(t > 0.0 && t < 1.0)) throw Error("repeat_factors: t must lie in (0,1)");
  double total = 0.0;
  for (int c : counts) {
    if (c <= 0) throw Error("repeat_factors: counts must be positive");
    total += c;
  }
  std::vector<double> out;
  out.reserve(counts.size());
  for (int c : counts) {
    const double f = c / total;
    out.push_back(std::max(1.0, std::sqrt(t / f)));
  }
  return out;
}

std::vector<double> image_repeat_factors(
    const World& world, std::span<const double> category_factors) {
  std::vector<double> out;
  out.reserve(world.train_images.size());
  for (const auto& img : world.train_images) {
    double r = 1.0;
    for (const auto& o : img.objects) r = std::max(r, category_factors[o.category_id]);
    out.push_back(r);
  }
  return out;
}

Head train_repeat_sampled(const World& world, double t,
                          const TrainSchedule& schedule, Rng& rng) {
  const auto counts = world.train_counts();
  const auto cat = repeat_factors(counts, t);
  const auto img = image_repeat_factors(world, cat);
  const TrainingSet data = build_training_set(world);
  return train_with_image_factors(world, data, img, schedule, rng);
}

double accuracy(const Head& head, const TrainingSet& data) {
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    if (data.features[i].rows() == 0) continue;
    const ScoreMatrix s = forward(head, data.features[i]);
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      Eigen::Index arg = 0;
      s.values.row(r).maxCoeff(&arg);
      correct += arg == data.labels[i][r];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

double dataset_loss(const Head& head, const TrainingSet& data) {
  double sum = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    const auto n = static_cast<std::size_t>(data.features[i].rows());
    if (n == 0) continue;
    sum += cross_entropy(head, data.features[i], data.labels[i]) * n;
    total += n;
  }
  return total == 0 ? 0.0 : sum / total;
}

nlohmann::json head_to_json(const Head& head, const std::string& fingerprint) {
  auto weights = nlohmann::json::array();
  for (Eigen::Index r = 0; r < head.weights.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < head.weights.cols(); ++c) {
      row.push_back(head.weights(r, c));
    }
    weights.push_back(std::move(row));
  }
  auto biases = nlohmann::json::array();
  for (Eigen::Index r = 0; r < head.biases.size(); ++r) biases.push_back(head.biases[r]);
  return {{"format", "lvcal-head-v1"},
          {"num_foreground", head.num_foreground()},
          {"feature_dim", head.feature_dim()},
          {"class_order", head.class_order()},
          {"weights", std::move(weights)},
          {"biases", std::move(biases)},
          {"fingerprint", fingerprint}};
}

Head head_from_json(const nlohmann::json& j) {
  try {
    const int num_fg = j.at("num_foreground").get<int>();
    const int dim = j.at("feature_dim").get<int>();
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    if (num_fg < 1 || dim < 1 || jw.size() != static_cast<std::size_t>(num_fg + 1) ||
        jb.size() != static_cast<std::size_t>(num_fg + 1)) {
      throw Error("head checkpoint: inconsistent dimensions");
    }
    Head head;
    head.weights.resize(num_fg + 1, dim);
    head.biases.resize(num_fg + 1);
    for (int r = 0; r <= num_fg; ++r) {
      if (jw[r].size() != static_cast<std::size_t>(dim)) {
        throw Error("head checkpoint: inconsistent dimensions");
      }
      for (int c = 0; c < dim; ++c) head.weights(r, c) = jw[r][c].get<double>();
      head.biases[r] = jb[r].get<double>();
    }
    if (!head.weights.allFinite() || !head.biases.allFinite()) {
      throw Error("head checkpoint: non-finite parameters");
    }
    return head;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed head checkpoint: ") + e.what());
  }
}

void save_head(const Head& head, const std::string& fingerprint,
               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << head_to_json(head, fingerprint).dump() << "\n";
}

Head load_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return head_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace lvcal

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
#ifndef LVCAL_HEADS_H_
#define LVCAL_HEADS_H_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lvcal/common.h"
#include "lvcal/scores.h"
#include "lvcal/world.h"

namespace lvcal {

// Linear softmax classifier over C foreground classes plus background. Row c
// of `weights` scores category c; the last row scores background.
struct Head {
  Matrix weights;  // (C+1) x D
  Vector biases;   // C+1

  int num_foreground() const { return static_cast<int>(weights.rows()) - 1; }
  int background_index() const { return num_foreground(); }
  int feature_dim() const { return static_cast<int>(weights.cols()); }
  // Category ids in column order; background is reported as -1.
  std::vector<int> class_order() const;

  friend bool operator==(const Head& a, const Head& b) {
    return a.weights.rows() == b.weights.rows() &&
           a.weights.cols() == b.weights.cols() && a.weights == b.weights &&
           a.biases == b.biases;
  }
};

struct Gradient {
  Matrix weights;
  Vector biases;

  static Gradient zeros_like(const Head& head);
};

// Weights ~ N(0, scale^2), biases zero.
Head init_head(int num_foreground, int feature_dim, double scale, Rng& rng);

ScoreMatrix forward(const Head& head, const Matrix& features);

// Mean cross-entropy over the rows of `features`. Labels are column indices
// (0..C-1 foreground, C background). Fills `grad` when non-null.
double cross_entropy(const Head& head, const Matrix& features,
                     std::span<const int> labels, Gradient* grad = nullptr);

// Heavy-ball momentum: v <- momentum * v + grad; w <- w - lr * v.
// Throws Error on a non-finite gradient.
void sgd_step(Head& head, const Gradient& grad, double lr, double momentum,
              Gradient& velocity);

struct LrStage {
  int start_epoch = 0;
  double learning_rate = 0.01;
};

struct TrainSchedule {
  int epochs = 12;
  std::vector<LrStage> stages = {{0, 0.01}, {8, 0.001}, {11, 0.0001}};
  double momentum = 0.9;
  int minibatch_size = 8;  // images per step
  double init_scale = 0.01;

  void validate() const;
  double lr_at(int epoch) const;
};

struct BalancedSamplerConfig {
  int classes_per_step = 16;
  int images_per_class = 1;
  bool include_background = true;
  double background_ratio = 1.0;
  double iou_threshold = 0.5;
  // Steps per epoch for retraining; <= 0 means one step per standard minibatch
  // of training images.
  int steps_per_epoch = 0;

  void validate() const;
};

struct LabeledBatch {
  Matrix features;
  std::vector<int> labels;  // column indices
  std::vector<int> sampled_classes;
};

// Frozen first-stage output for the training split with matched labels, in
// column-index form. One entry per training image. With `include_gt` the GT
// boxes join the proposal pool, as two-stage detectors do during training.
struct TrainingSet {
  std::vector<Matrix> features;
  std::vector<std::vector<int>> labels;
  int num_foreground = 0;
};

TrainingSet build_training_set(const World& world,
                               double iou_threshold = 0.5,
                               bool include_gt = true);

Head train_standard(const World& world, const TrainSchedule& schedule,
                    Rng& rng);

// Images drawn per epoch with repeat `factors[i]` for image i, stochastic
// rounding of the fractional part, then shuffled. All-ones factors consume
// the stream exactly like a plain shuffle.
std::vector<int> epoch_image_order(std::span<const double> factors, Rng& rng);

// Trains on the given per-image repeat factors; all ones is standard training.
Head train_with_image_factors(const World& world, const TrainingSet& data,
                              std::span<const double> factors,
                              const TrainSchedule& schedule, Rng& rng);

// Class-balanced sampler over the frozen training proposals. Each batch picks
// classes_per_step classes uniformly without replacement, images_per_class
// images of each, and keeps the proposals matched to the picked classes plus
// their GT boxes, topped up with background rows.
class BalancedSampler {
 public:
  BalancedSampler(const World& world, const BalancedSamplerConfig& cfg);
  LabeledBatch sample(Rng& rng) const;

 private:
  const World& world_;
  BalancedSamplerConfig cfg_;
  TrainingSet data_;
  std::vector<std::vector<int>> images_of_class_;
};

// One batch from a fresh sampler.
LabeledBatch sample_balanced_batch(const World& world,
                                   const BalancedSamplerConfig& cfg, Rng& rng);

// `base` only fixes the output shape; the new head starts from a fresh
// random initialization.
Head train_balanced(const World& world, const std::optional<Head>& base,
                    const BalancedSamplerConfig& cfg,
                    const TrainSchedule& schedule, Rng& rng);

// r_c = max(1, sqrt(t / f_c)), f_c = count_c / sum(counts).
std::vector<double> repeat_factors(std::span<const int> counts, double t);
// Max of the category factors over the objects of each training image.
std::vector<double> image_repeat_factors(const World& world,
                                         std::span<const double> category_factors);

Head train_repeat_sampled(const World& world, double t,
                          const TrainSchedule& schedule, Rng& rng);

// Training-set accuracy of argmax predictions.
double accuracy(const Head& head, const TrainingSet& data);
// Mean cross-entropy over the whole training set.
double dataset_loss(const Head& head, const TrainingSet& data);

nlohmann::json head_to_json(const Head& head, const std::string& fingerprint);
Head head_from_json(const nlohmann::json& j);
void save_head(const Head& head, const std::string& fingerprint,
               const std::filesystem::path& path);
Head load_head(const std::filesystem::path& path);

}  // namespace lvcal

#endif  // LVCAL_HEADS_H_

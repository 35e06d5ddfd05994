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

#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "lvcal/experiment.h"

namespace lvcal {
namespace {

Head random_head(int c, int d, Rng& rng, double scale = 1.0) {
  Head h = init_head(c, d, scale, rng);
  std::normal_distribution<double> n(0.0, scale);
  for (Eigen::Index i = 0; i < h.biases.size(); ++i) h.biases(i) = n(rng);
  return h;
}

Matrix random_features(int rows, int d, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix f(rows, d);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < d; ++j) f(i, j) = n(rng);
  }
  return f;
}

TEST(Forward, ZeroHeadIsUniform) {
  Rng rng(0);
  Head h = init_head(4, 3, 0.0, rng);
  const ScoreMatrix s = forward(h, random_features(6, 3, rng));
  ASSERT_EQ(s.values.cols(), 5);
  for (Eigen::Index r = 0; r < s.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < 5; ++c) EXPECT_DOUBLE_EQ(s.values(r, c), 0.2);
  }
}

TEST(Forward, MatchesLongDoubleReference) {
  Rng rng(1);
  const Head h = random_head(3, 4, rng, 2.0);
  const Matrix f = random_features(3, 4, rng);
  const ScoreMatrix s = forward(h, f);
  for (int r = 0; r < 3; ++r) {
    std::vector<long double> logits(4);
    long double z = 0;
    for (int k = 0; k < 4; ++k) {
      long double a = h.biases(k);
      for (int d = 0; d < 4; ++d) {
        a += static_cast<long double>(h.weights(k, d)) * f(r, d);
      }
      logits[k] = std::exp(a);
      z += logits[k];
    }
    for (int k = 0; k < 4; ++k) {
      EXPECT_NEAR(s.values(r, k), static_cast<double>(logits[k] / z), 1e-14);
    }
  }
}

TEST(Forward, RowsAreDistributionsAndShiftInvariant) {
  Rng rng(2);
  Head h = random_head(6, 5, rng, 30.0);
  const Matrix f = random_features(20, 5, rng);
  const ScoreMatrix s = forward(h, f);
  for (Eigen::Index r = 0; r < s.values.rows(); ++r) {
    EXPECT_NEAR(s.values.row(r).sum(), 1.0, 1e-12);
    EXPECT_TRUE(s.values.row(r).allFinite());
  }
  Head shifted = h;
  shifted.biases.array() += 1000.0;
  const ScoreMatrix t = forward(shifted, f);
  EXPECT_LT((s.values - t.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, RejectsFeatureDimMismatch) {
  Rng rng(3);
  const Head h = init_head(2, 4, 0.1, rng);
  EXPECT_THROW(forward(h, random_features(2, 3, rng)), Error);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  std::uniform_int_distribution<int> label(0, 3);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Head h = random_head(3, 4, rng, 0.5);
    const Matrix f = random_features(6, 4, rng);
    std::vector<int> labels(6);
    for (int& l : labels) l = label(rng);
    Gradient g;
    cross_entropy(h, f, labels, &g);
    const double eps = 1e-6;
    auto rel = [](double a, double n) {
      return std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
    };
    for (Eigen::Index i = 0; i < h.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < h.weights.cols(); ++j) {
        Head p = h, m = h;
        p.weights(i, j) += eps;
        m.weights(i, j) -= eps;
        const double num = (cross_entropy(p, f, labels) - cross_entropy(m, f, labels)) / (2 * eps);
        worst = std::max(worst, rel(g.weights(i, j), num));
      }
      Head p = h, m = h;
      p.biases(i) += eps;
      m.biases(i) -= eps;
      const double num = (cross_entropy(p, f, labels) - cross_entropy(m, f, labels)) / (2 * eps);
      worst = std::max(worst, rel(g.biases(i), num));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(CrossEntropy, RejectsBadLabels) {
  Rng rng(5);
  const Head h = init_head(2, 3, 0.1, rng);
  const Matrix f = random_features(2, 3, rng);
  EXPECT_THROW(cross_entropy(h, f, std::vector<int>{0, 3}), Error);
  EXPECT_THROW(cross_entropy(h, f, std::vector<int>{0}), Error);
}

TEST(SgdStep, Examples) {
  Rng rng(6);
  const Head h0 = random_head(2, 3, rng);
  Gradient g = Gradient::zeros_like(h0);
  g.weights.setOnes();
  g.biases.setOnes();

  Head h = h0;
  Gradient v = Gradient::zeros_like(h);
  sgd_step(h, g, 0.1, 0.0, v);
  EXPECT_LT((h.weights - (h0.weights.array() - 0.1).matrix()).cwiseAbs().maxCoeff(), 1e-15);

  h = h0;
  v = Gradient::zeros_like(h);
  sgd_step(h, g, 0.0, 0.9, v);
  EXPECT_EQ(h, h0);

  h = h0;
  v = Gradient::zeros_like(h);
  sgd_step(h, g, 0.05, 0.9, v);
  sgd_step(h, g, 0.05, 0.9, v);
  const Matrix delta = h0.weights - h.weights;
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    EXPECT_NEAR(delta.data()[i], 0.05 * (1 + 1.9), 1e-15);
  }
}

TEST(SgdStep, RejectsNonFiniteGradient) {
  Rng rng(7);
  Head h = init_head(2, 2, 0.1, rng);
  Gradient g = Gradient::zeros_like(h);
  Gradient v = Gradient::zeros_like(h);
  g.weights(0, 0) = std::nan("");
  EXPECT_THROW(sgd_step(h, g, 0.1, 0.9, v), Error);
}

TEST(TrainSchedule, StepDecay) {
  const TrainSchedule s;
  EXPECT_DOUBLE_EQ(s.lr_at(0), 0.01);
  EXPECT_DOUBLE_EQ(s.lr_at(7), 0.01);
  EXPECT_DOUBLE_EQ(s.lr_at(8), 0.001);
  EXPECT_DOUBLE_EQ(s.lr_at(11), 0.0001);
  TrainSchedule bad;
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), Error);
}

WorldConfig tiny_world(int categories, double zipf, int total, double noise) {
  WorldConfig cfg;
  cfg.num_categories = categories;
  cfg.zipf_exponent = zipf;
  cfg.total_instances = total;
  cfg.feature_dim = 8;
  cfg.feature_noise = noise;
  cfg.background_per_image = 6;
  return cfg;
}

TEST(TrainStandard, SingleSeparableClass) {
  // Unjittered small boxes: random background boxes almost never reach the
  // match threshold, so labels follow features.
  WorldConfig cfg = tiny_world(1, 1.0, 300, 0.0);
  cfg.box_jitter = 0.0;
  cfg.min_box_size = cfg.max_box_size = 0.1;
  cfg.feature_dim = 64;
  const World w = generate_world(cfg);
  Rng rng(8);
  const Head h = train_standard(w, TrainSchedule{}, rng);
  EXPECT_GT(accuracy(h, build_training_set(w)), 0.99);
}

TEST(TrainStandard, SameSeedSameWeights) {
  const World w = generate_world(tiny_world(5, 1.0, 200, 1.0));
  Rng a(9), b(9);
  EXPECT_EQ(train_standard(w, TrainSchedule{}, a), train_standard(w, TrainSchedule{}, b));
}

TEST(TrainStandard, LossDecreasesEpochByEpoch) {
  const World w = generate_world(tiny_world(3, 1.0, 300, 0.0));
  const TrainingSet data = build_training_set(w);
  double prev = std::log(4.0) + 1e-9;
  for (int epochs = 1; epochs <= 6; ++epochs) {
    TrainSchedule s;
    s.epochs = epochs;
    Rng rng(10);
    const double loss = dataset_loss(train_standard(w, s, rng), data);
    EXPECT_LE(loss, prev) << "epochs " << epochs;
    prev = loss;
  }
}

TEST(TrainingSet, GtRowsJoinProposals) {
  const World w = generate_world(tiny_world(4, 1.0, 100, 1.0));
  const TrainingSet with = build_training_set(w, 0.5, true);
  const TrainingSet without = build_training_set(w, 0.5, false);
  for (std::size_t i = 0; i < w.train_images.size(); ++i) {
    EXPECT_EQ(with.features[i].rows(),
              without.features[i].rows() + static_cast<Eigen::Index>(w.train_images[i].objects.size()));
  }
}

TEST(BalancedSampler, AllClassesPerStep) {
  const World w = generate_world(tiny_world(6, 1.0, 200, 1.0));
  BalancedSamplerConfig cfg;
  cfg.classes_per_step = 6;
  const BalancedSampler sampler(w, cfg);
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const auto batch = sampler.sample(rng);
    EXPECT_EQ(batch.sampled_classes.size(), 6u);
    for (int l : batch.labels) {
      EXPECT_GE(l, 0);
      EXPECT_LE(l, 6);
    }
  }
}

TEST(BalancedSampler, NoBackgroundWhenDisabled) {
  const World w = generate_world(tiny_world(6, 1.0, 200, 1.0));
  BalancedSamplerConfig cfg;
  cfg.classes_per_step = 3;
  cfg.include_background = false;
  const BalancedSampler sampler(w, cfg);
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const auto batch = sampler.sample(rng);
    ASSERT_FALSE(batch.labels.empty());
    for (int l : batch.labels) EXPECT_NE(l, 6);
  }
}

TEST(BalancedSampler, ForegroundComesFromSampledClasses) {
  const World w = generate_world(tiny_world(30, 1.6, 600, 1.0));
  const BalancedSampler sampler(w, BalancedSamplerConfig{});
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const auto batch = sampler.sample(rng);
    const std::set<int> picked(batch.sampled_classes.begin(), batch.sampled_classes.end());
    EXPECT_EQ(picked.size(), 16u);
    std::size_t fg = 0, bg = 0;
    for (int l : batch.labels) {
      if (l == 30) {
        ++bg;
      } else {
        ++fg;
        EXPECT_TRUE(picked.count(l)) << l;
      }
    }
    EXPECT_LE(bg, fg);
  }
}

TEST(BalancedSampler, ClassFrequencyIsUniform) {
  const World w = generate_world(tiny_world(100, 1.6, 400, 1.0));
  const BalancedSampler sampler(w, BalancedSamplerConfig{});
  Rng rng(14);
  std::vector<int> hits(100, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    for (int c : sampler.sample(rng).sampled_classes) ++hits[c];
  }
  for (int c = 0; c < 100; ++c) {
    EXPECT_NEAR(static_cast<double>(hits[c]) / draws, 0.16, 0.02) << "class " << c;
  }
}

TEST(TrainBalanced, SameSeedSameWeights) {
  const World w = generate_world(tiny_world(5, 1.0, 200, 1.0));
  BalancedSamplerConfig cfg;
  cfg.classes_per_step = 3;
  Rng a(15), b(15);
  EXPECT_EQ(train_balanced(w, std::nullopt, cfg, TrainSchedule{}, a),
            train_balanced(w, std::nullopt, cfg, TrainSchedule{}, b));
}

TEST(TrainBalanced, BalancedWorldMatchesStandard) {
  ExperimentConfig cfg;
  cfg.world = tiny_world(16, 0.0, 3200, 3.0);
  cfg.world.feature_dim = 16;
  const World w = generate_world(cfg.world);
  const Head standard = train_head(w, cfg, TrainMode::kStandard);
  const Head balanced = train_head(w, cfg, TrainMode::kBalanced);
  const Evaluator ev(w, cfg.decode, cfg.eval);
  const double a = *ev.evaluate(ev.scores(standard)).overall_ap;
  const double b = *ev.evaluate(ev.scores(balanced)).overall_ap;
  EXPECT_GT(a, 0.05);
  EXPECT_NEAR(b / a, 1.0, 0.10) << a << " vs " << b;
}

TEST(RepeatFactors, Examples) {
  const auto r = repeat_factors(std::vector<int>{1, 9999}, 0.001);
  EXPECT_NEAR(r[0], std::sqrt(10.0), 1e-12);
  EXPECT_DOUBLE_EQ(r[1], 1.0);
  const auto at = repeat_factors(std::vector<int>{1000, 999000}, 0.001);
  EXPECT_DOUBLE_EQ(at[0], 1.0);
  const auto q = repeat_factors(std::vector<int>{1, 9999}, 0.01);
  EXPECT_NEAR(q[0], 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(q[1], 1.0);
  EXPECT_THROW(repeat_factors(std::vector<int>{0, 0}, 0.01), Error);
  EXPECT_THROW(repeat_factors(std::vector<int>{1, 2}, -1.0), Error);
}

TEST(RepeatFactors, ImageFactorIsMaxOverObjects) {
  const World w = generate_world(tiny_world(8, 1.6, 200, 1.0));
  std::vector<double> cat(8);
  std::iota(cat.begin(), cat.end(), 1.0);
  const auto img = image_repeat_factors(w, cat);
  for (std::size_t i = 0; i < w.train_images.size(); ++i) {
    double m = 1.0;
    for (const auto& o : w.train_images[i].objects) m = std::max(m, cat[o.category_id]);
    EXPECT_DOUBLE_EQ(img[i], m);
  }
}

TEST(RepeatSampling, DrawFrequencyMatchesFactors) {
  const std::vector<double> factors = {1.0, 1.5, 2.3, 3.7, 10.0};
  Rng rng(16);
  std::vector<long> draws(factors.size(), 0);
  const int epochs = 10000;
  for (int e = 0; e < epochs; ++e) {
    for (int i : epoch_image_order(factors, rng)) ++draws[i];
  }
  for (std::size_t i = 0; i < factors.size(); ++i) {
    EXPECT_NEAR(static_cast<double>(draws[i]) / epochs / factors[i], 1.0, 0.02) << i;
  }
}

TEST(RepeatSampling, TinyThresholdIsStandardTraining) {
  const World w = generate_world(tiny_world(6, 1.6, 300, 1.0));
  Rng a(17), b(17);
  EXPECT_EQ(train_repeat_sampled(w, 1e-12, TrainSchedule{}, a),
            train_standard(w, TrainSchedule{}, b));
}

TEST(HeadFiles, RoundTrip) {
  Rng rng(18);
  const Head h = random_head(4, 3, rng);
  const auto path = std::filesystem::temp_directory_path() / "lvcal_head_test.json";
  save_head(h, "abc", path);
  EXPECT_EQ(load_head(path), h);
  EXPECT_THROW(head_from_json(nlohmann::json::object()), Error);
}

}  // namespace
}  // namespace lvcal

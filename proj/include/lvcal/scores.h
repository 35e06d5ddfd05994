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
#ifndef LVCAL_SCORES_H_
#define LVCAL_SCORES_H_

#include "lvcal/common.h"

namespace lvcal {

// Per-proposal class scores. Columns 0..C-1 are foreground categories in id
// order; column C is background. Rows produced by a head sum to one;
// combined matrices need not.
struct ScoreMatrix {
  Matrix values;

  ScoreMatrix() = default;
  explicit ScoreMatrix(Matrix m) : values(std::move(m)) {}

  Eigen::Index rows() const { return values.rows(); }
  int num_foreground() const { return static_cast<int>(values.cols()) - 1; }
  int background_index() const { return num_foreground(); }

  friend bool operator==(const ScoreMatrix& a, const ScoreMatrix& b) {
    return a.values.rows() == b.values.rows() &&
           a.values.cols() == b.values.cols() && a.values == b.values;
  }
};

}  // namespace lvcal

#endif  // LVCAL_SCORES_H_

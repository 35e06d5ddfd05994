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
#ifndef LVCAL_COMMON_H_
#define LVCAL_COMMON_H_

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace lvcal {

// Raised for contract violations: bad configs, shape mismatches, malformed
// input files, non-finite training state.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// Row-major so that one row is one proposal.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Instance-count bins: (0,10), [10,100), [100,1000), [1000,inf).
enum class BinId : int { kRare = 0, kFew = 1, kMedium = 2, kFrequent = 3 };
inline constexpr int kNumBins = 4;
inline constexpr std::array<BinId, kNumBins> kAllBins = {
    BinId::kRare, BinId::kFew, BinId::kMedium, BinId::kFrequent};

inline constexpr int bin_index(BinId bin) { return static_cast<int>(bin); }

// Printable label used in report headers, e.g. "[10,100)".
std::string_view bin_label(BinId bin);

// CSV field with RFC 4180 quoting when it holds a comma or quote.
std::string csv_field(std::string_view text);

// Independent, reproducible RNG stream for (seed, stream name, index).
Rng derive_rng(std::uint64_t seed, std::string_view stream,
               std::uint64_t index = 0);

// 64-bit FNV-1a, used for config fingerprints.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace lvcal

#endif  // LVCAL_COMMON_H_

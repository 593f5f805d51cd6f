// Copyright 2026 The attnscope Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "attnscope/matrix.hpp"
#include "attnscope/tensor_io.hpp"

namespace attnscope {

// Feature layout: [self, cls, sep, comma, period, w00 .. w(N-1)].
inline constexpr std::array<SpecialKind, 4> kSpecialOrder = {
    SpecialKind::kCls, SpecialKind::kSep, SpecialKind::kComma, SpecialKind::kPeriod};
inline constexpr std::size_t kSelfColumn = 0;
inline constexpr std::size_t kFirstSpecialColumn = 1;
inline constexpr std::size_t kFirstWindowColumn = 5;

struct FeatureConfig {
  std::size_t num_windows = 16;
  // Average only over non-special source rows.
  bool exclude_special_sources = false;

  std::size_t dimension() const { return kFirstWindowColumn + num_windows; }
};

struct DistanceFeature {
  double self_mass = 0.0;
  std::array<double, 4> special_mass{};  // kSpecialOrder
  std::vector<double> window_mass;

  std::vector<double> to_vector() const;
  static DistanceFeature from_vector(std::span<const double> v);
  double total() const;
};

struct HeadId {
  std::size_t layer = 0;
  std::size_t head = 0;

  friend auto operator<=>(const HeadId&, const HeadId&) = default;
};

std::vector<std::string> feature_column_names(const FeatureConfig& cfg);

// Bucket of a distance t in [1, L-1]: min(floor(t*N/L), N-1). Buckets are
// half-open [i*L/N, (i+1)*L/N).
std::size_t window_index(std::size_t distance, std::size_t length, std::size_t num_windows);

// Partition of one head's row-stochastic matrix (L*L, row-major) averaged over
// source rows. Every (source, target) pair lands in exactly one bucket:
// diagonal -> self, special target -> its special bucket, otherwise the
// window of |target - source|.
DistanceFeature sample_feature(std::span<const double> weights, std::span<const TokenMeta> tokens,
                               const FeatureConfig& cfg = {});

// Unweighted mean of sample_feature over every sample in the bundle.
DistanceFeature head_feature(const AttentionBundle& bundle, HeadId id, const FeatureConfig& cfg = {});

// One row per head, layer-major with the head index fastest.
Matrix feature_matrix(const AttentionBundle& bundle, const FeatureConfig& cfg = {});

}  // namespace attnscope

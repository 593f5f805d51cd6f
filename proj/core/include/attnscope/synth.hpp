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

#include <cstddef>
#include <cstdint>
#include <array>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "attnscope/clustering.hpp"
#include "attnscope/feature.hpp"
#include "attnscope/tensor_io.hpp"

namespace attnscope {

enum class PatternKind { kDiagonal = 0, kVertical = 1, kDense = 2, kDenseVertical = 3 };

inline constexpr std::array<PatternKind, 4> kAllPatterns = {
    PatternKind::kDiagonal, PatternKind::kVertical, PatternKind::kDense, PatternKind::kDenseVertical};

std::string_view pattern_name(PatternKind k);  // "diagonal_gen", ...
PatternKind parse_pattern(std::string_view name);
// The head type a generator is meant to imitate.
TypeName expected_type(PatternKind k);

struct SynthParams {
  std::size_t bandwidth = 2;         // diagonal band half-width
  double dense_exponent = 2.0;       // dense weight ~ (|u-s|/L)^exponent + floor
  double dense_floor = 0.02;
  double dense_special_scale = 0.25;  // dense under-weights special columns
  double dense_share = 0.6;           // dense part of the dense & vertical mix
};

// Token table for a generated sequence: position 0 "[CLS]", L-1 "[SEP]",
// other special positions alternate "." and ",". Sentence ids start at 0
// after [CLS] and advance after every "."; [CLS]/[SEP] get -1.
std::vector<TokenMeta> synth_tokens(std::size_t length, const std::vector<std::size_t>& special_positions);

// Row-stochastic L x L matrix (row-major) of one pattern. `noise` mixes in a
// random row-stochastic matrix with that weight; rows are renormalised last.
std::vector<double> gen_matrix(PatternKind kind, std::span<const TokenMeta> tokens, double noise,
                               std::uint64_t seed, const SynthParams& params = {});

// Single-layer, single-head sample.
AttentionSample gen_sample(PatternKind kind, std::size_t length, double noise, std::uint64_t seed,
                           const std::vector<std::size_t>& special_positions,
                           const SynthParams& params = {});

struct PlantedBundle {
  AttentionBundle bundle;
  std::map<HeadId, PatternKind> planted;
};

// One layer with 4 * heads_per_kind heads; head h imitates kAllPatterns[h % 4].
// Every sample gets [CLS], [SEP] and max(1, L/8) random interior punctuation
// positions drawn from Rng::derive(seed, sample).
PlantedBundle gen_bundle(std::size_t heads_per_kind, std::size_t length, std::size_t samples,
                         double noise, std::uint64_t seed, const SynthParams& params = {});

}  // namespace attnscope

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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace attnscope {

enum class SpecialKind : std::uint8_t { kNone = 0, kCls = 1, kSep = 2, kComma = 3, kPeriod = 4 };

// Exact, case-sensitive surface match: "[CLS]", "[SEP]", ",", ".".
SpecialKind special_kind_of(std::string_view surface);
std::string_view special_kind_name(SpecialKind kind);

struct TokenMeta {
  std::string surface;
  SpecialKind special_kind = SpecialKind::kNone;
  // -1 marks tokens that belong to no sentence (CLS/SEP).
  std::int32_t sentence_id = -1;

  static TokenMeta make(std::string surface, std::int32_t sentence_id);

  bool is_special() const { return special_kind != SpecialKind::kNone; }

  friend bool operator==(const TokenMeta&, const TokenMeta&) = default;
};

// One input sequence: attention weights for every (layer, head) plus the
// token table. Weights are stored as [layer][head][source][target] in a flat
// row-major buffer; the sequence length is tokens.size().
struct AttentionSample {
  std::string sample_id;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::vector<TokenMeta> tokens;
  std::vector<double> weights;

  std::size_t length() const { return tokens.size(); }

  std::span<const double> head(std::size_t layer, std::size_t h) const {
    const std::size_t l2 = length() * length();
    return {weights.data() + (layer * num_heads + h) * l2, l2};
  }
  std::span<double> head(std::size_t layer, std::size_t h) {
    const std::size_t l2 = length() * length();
    return {weights.data() + (layer * num_heads + h) * l2, l2};
  }

  friend bool operator==(const AttentionSample&, const AttentionSample&) = default;
};

struct AttentionBundle {
  std::string model_name;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::vector<AttentionSample> samples;

  friend bool operator==(const AttentionBundle&, const AttentionBundle&) = default;
};

inline constexpr double kIngestRowSumTolerance = 1e-4;

struct RowDeviation {
  std::size_t layer = 0;
  std::size_t head = 0;
  std::size_t row = 0;
  double deviation = 0.0;  // |row sum - 1|
};

struct ValidationDiagnostics {
  double max_row_deviation = 0.0;
  std::optional<RowDeviation> worst_row;
  double min_entry = 0.0;
  double max_entry = 0.0;
  // Rows whose deviation exceeds the tolerance, in (layer, head, row) order.
  std::vector<RowDeviation> offending_rows;
  // Entries outside [0, 1] or non-finite.
  std::size_t out_of_range_entries = 0;
  bool shape_ok = true;

  bool ok() const { return shape_ok && offending_rows.empty() && out_of_range_entries == 0; }
};

// Never throws. Row sums are accumulated in double precision.
ValidationDiagnostics validate_sample(const AttentionSample& sample,
                                      double tolerance = kIngestRowSumTolerance);

struct LoadOptions {
  bool validate = true;
  double tolerance = kIngestRowSumTolerance;
};

inline constexpr std::string_view kManifestName = "manifest.json";
inline constexpr std::string_view kSampleMagic = "ATNB0001";

// Bundle directory layout:
//   manifest.json      model name, dims and one {id, file, length} per sample
//   sample-NNNNN.atnb  "ATNB0001", u32 layers, heads, L, L (little-endian),
//                      float32 weights row-major, then the token table:
//                      u32 count; per token u16 byte length, UTF-8 surface,
//                      u8 special kind, i32 sentence id.
// Weights are stored as float32, so a round trip is exact only for weights
// that are representable in float32.
AttentionBundle load_bundle(const std::filesystem::path& dir, const LoadOptions& options = {});
void write_bundle(const AttentionBundle& bundle, const std::filesystem::path& dir);

// Single-sample binary codec used by the bundle reader and writer.
std::vector<std::uint8_t> encode_sample(const AttentionSample& sample);
AttentionSample decode_sample(std::span<const std::uint8_t> bytes, std::string sample_id);

// Rounds every weight through float32, i.e. what a write/load cycle yields.
AttentionBundle to_storage_precision(AttentionBundle bundle);

}  // namespace attnscope

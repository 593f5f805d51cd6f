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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnscope/ablation.hpp"
#include "attnscope/clustering.hpp"
#include "attnscope/feature.hpp"
#include "attnscope/matrix.hpp"

namespace attnscope {

// Feature matrix plus the head each row belongs to.
struct FeatureTable {
  std::vector<HeadId> heads;
  std::vector<std::string> columns;  // self, cls, sep, comma, period, w00 ...
  Matrix values;

  std::size_t num_windows() const { return values.cols() - kFirstWindowColumn; }
};

FeatureTable make_feature_table(const Matrix& features, std::size_t num_heads, const FeatureConfig& cfg);

// CSV: header "layer,head,self,cls,sep,comma,period,w00,...", one row per
// head, shortest round-trip decimal formatting.
std::string feature_table_to_csv(const FeatureTable& table);
FeatureTable feature_table_from_csv(std::string_view text);

// Binary: "ATNF0001", u32 rows, u32 cols, then per row u32 layer, u32 head
// and cols float32 values, all little-endian.
std::vector<std::uint8_t> encode_feature_table(const FeatureTable& table);
FeatureTable decode_feature_table(std::span<const std::uint8_t> bytes);

struct AssignmentRow {
  HeadId head;
  std::size_t cluster = 0;
  std::optional<TypeName> type;
};

// CSV "layer,head,cluster,type_name"; type_name empty when unnamed.
std::string assignments_to_csv(const std::vector<AssignmentRow>& rows);
std::vector<AssignmentRow> assignments_from_csv(std::string_view text);
// Requires every row to carry a type and the rows to tile a layers x heads grid.
HeadTyping typing_from_assignments(const std::vector<AssignmentRow>& rows);

// CSV "layer,head,x,y,cluster".
std::string coords_to_csv(const std::vector<HeadId>& heads, const Matrix& coords,
                          const std::vector<std::size_t>& clusters);
struct CoordsTable {
  std::vector<HeadId> heads;
  Matrix coords;
  std::vector<std::size_t> clusters;
};
CoordsTable coords_from_csv(std::string_view text);

std::string cluster_model_to_json(const ClusterModel& model, std::size_t num_windows,
                                  const std::vector<HeadId>& heads);
struct StoredModel {
  ClusterModel model;
  std::size_t num_windows = 16;
  std::vector<HeadId> heads;
};
StoredModel cluster_model_from_json(std::string_view text);

std::string stability_report_to_json(const StabilityReport& report, const std::vector<HeadId>& heads,
                                     std::size_t k, double fraction, std::uint64_t seed);

}  // namespace attnscope

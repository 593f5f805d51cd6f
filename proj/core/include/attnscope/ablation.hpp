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
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "attnscope/clustering.hpp"
#include "attnscope/feature.hpp"
#include "attnscope/tensor_io.hpp"

namespace attnscope {

enum class MaskMode { kKeep, kPrune, kUniform };
enum class MaskScope { kAll, kIntra, kInter };

std::string_view mask_mode_name(MaskMode m);    // "keep", "prune", "uniform"
std::string_view mask_scope_name(MaskScope s);  // "all", "intra", "inter"
MaskMode parse_mask_mode(std::string_view s);
MaskScope parse_mask_scope(std::string_view s);

struct HeadDirective {
  MaskMode mode = MaskMode::kKeep;
  MaskScope scope = MaskScope::kAll;

  friend bool operator==(const HeadDirective&, const HeadDirective&) = default;
};

struct MaskOptions {
  bool renormalize_rows = false;
  // Entries touching a token with sentence id -1 survive scoped ablation.
  // When false they count as inter-sentence.
  bool preserve_special_targets = true;
  // Sentences exempt from scoped ablation (source or target inside them).
  std::set<std::int32_t> protected_sentence_ids;

  friend bool operator==(const MaskOptions&, const MaskOptions&) = default;
};

// Ablation directive for every head of a model.
struct MaskSpec {
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::map<HeadId, HeadDirective> entries;
  MaskOptions options;

  const HeadDirective& at(HeadId id) const;

  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

// Throws DomainError unless every head has exactly one entry, KEEP carries
// scope ALL, and UNIFORM carries scope ALL.
void check_mask_spec(const MaskSpec& spec);

// Head typing produced by clustering + naming; must cover every head.
struct HeadTyping {
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::map<HeadId, TypeName> types;
};

enum class ScopeDirective { kKeep, kAblateIntra, kAblateInter };

MaskSpec make_type_mask(const HeadTyping& typing, const std::set<TypeName>& targets, MaskMode mode);
MaskSpec make_distance_mask(const HeadTyping& typing,
                            const std::map<TypeName, ScopeDirective>& per_type_scope);

// Pure transform of one sample. KEEP heads are copied bit for bit.
AttentionSample apply_mask(const AttentionSample& sample, const MaskSpec& spec);

// One row of the type-pruning / substitution table or the distance-ablation
// table, expressed per type.
enum class TypeAction { kKeep, kPrune, kUniform, kAblateIntra, kAblateInter };

struct ExperimentPlan {
  std::string id;  // p01 .. p19
  std::string description;
  std::map<TypeName, TypeAction> actions;
};

// The 19 plans: p01 baseline, p02-p07 pruning, p08-p11 uniform
// substitution, p12-p15 removing intra or inter attention of one type,
// p16-p19 removing it from every type but one.
std::vector<ExperimentPlan> table_plans();
MaskSpec compile_plan(const ExperimentPlan& plan, const HeadTyping& typing);

// Structured-text (JSON) codec with canonical ordering.
std::string mask_spec_to_json(const MaskSpec& spec);
MaskSpec mask_spec_from_json(std::string_view text);

}  // namespace attnscope

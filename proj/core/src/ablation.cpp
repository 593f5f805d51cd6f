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

#include "attnscope/ablation.hpp"

#include <fmt/format.h>

#include "attnscope/error.hpp"
#include "json.hpp"

namespace attnscope {

namespace {

using nlohmann::json;

constexpr std::string_view kMaskFormat = "attnscope-mask-v1";

void check_typing(const HeadTyping& typing) {
  for (std::size_t l = 0; l < typing.num_layers; ++l) {
    for (std::size_t h = 0; h < typing.num_heads; ++h) {
      if (!typing.types.contains({l, h})) {
        throw DomainError(fmt::format("head typing misses layer {} head {}", l, h));
      }
    }
  }
  if (typing.types.size() != typing.num_layers * typing.num_heads) {
    throw DomainError("head typing names heads outside the model");
  }
}

HeadDirective directive_for(TypeAction a) {
  switch (a) {
    case TypeAction::kKeep: return {MaskMode::kKeep, MaskScope::kAll};
    case TypeAction::kPrune: return {MaskMode::kPrune, MaskScope::kAll};
    case TypeAction::kUniform: return {MaskMode::kUniform, MaskScope::kAll};
    case TypeAction::kAblateIntra: return {MaskMode::kPrune, MaskScope::kIntra};
    case TypeAction::kAblateInter: return {MaskMode::kPrune, MaskScope::kInter};
  }
  return {};
}

MaskSpec compile_actions(const HeadTyping& typing, const std::map<TypeName, TypeAction>& actions) {
  check_typing(typing);
  MaskSpec spec;
  spec.num_layers = typing.num_layers;
  spec.num_heads = typing.num_heads;
  for (const auto& [id, type] : typing.types) {
    const auto it = actions.find(type);
    spec.entries[id] = directive_for(it == actions.end() ? TypeAction::kKeep : it->second);
  }
  return spec;
}

ExperimentPlan plan(std::string id, std::string description, std::map<TypeName, TypeAction> actions) {
  return {std::move(id), std::move(description), std::move(actions)};
}

std::map<TypeName, TypeAction> all_but(TypeName kept, TypeAction action) {
  std::map<TypeName, TypeAction> out;
  for (TypeName t : kAllTypes) {
    if (t != kept) out[t] = action;
  }
  return out;
}

}  // namespace

std::string_view mask_mode_name(MaskMode m) {
  switch (m) {
    case MaskMode::kKeep: return "keep";
    case MaskMode::kPrune: return "prune";
    case MaskMode::kUniform: return "uniform";
  }
  return "keep";
}

std::string_view mask_scope_name(MaskScope s) {
  switch (s) {
    case MaskScope::kAll: return "all";
    case MaskScope::kIntra: return "intra";
    case MaskScope::kInter: return "inter";
  }
  return "all";
}

MaskMode parse_mask_mode(std::string_view s) {
  for (MaskMode m : {MaskMode::kKeep, MaskMode::kPrune, MaskMode::kUniform}) {
    if (mask_mode_name(m) == s) return m;
  }
  throw DomainError(fmt::format("unknown mask mode '{}'", s));
}

MaskScope parse_mask_scope(std::string_view s) {
  for (MaskScope m : {MaskScope::kAll, MaskScope::kIntra, MaskScope::kInter}) {
    if (mask_scope_name(m) == s) return m;
  }
  throw DomainError(fmt::format("unknown mask scope '{}'", s));
}

const HeadDirective& MaskSpec::at(HeadId id) const {
  const auto it = entries.find(id);
  if (it == entries.end()) throw ShapeError(fmt::format("mask has no entry for layer {} head {}", id.layer, id.head));
  return it->second;
}

void check_mask_spec(const MaskSpec& spec) {
  if (spec.entries.size() != spec.num_layers * spec.num_heads) {
    throw DomainError(fmt::format("mask has {} entries for a {}x{} model", spec.entries.size(),
                                  spec.num_layers, spec.num_heads));
  }
  for (const auto& [id, d] : spec.entries) {
    if (id.layer >= spec.num_layers || id.head >= spec.num_heads) {
      throw DomainError(fmt::format("mask entry layer {} head {} outside the model", id.layer, id.head));
    }
    if (d.mode != MaskMode::kPrune && d.scope != MaskScope::kAll) {
      throw DomainError(fmt::format("layer {} head {}: {} requires scope all", id.layer, id.head,
                                    mask_mode_name(d.mode)));
    }
  }
}

MaskSpec make_type_mask(const HeadTyping& typing, const std::set<TypeName>& targets, MaskMode mode) {
  if (mode == MaskMode::kKeep) throw DomainError("type mask mode must be prune or uniform");
  std::map<TypeName, TypeAction> actions;
  for (TypeName t : targets) actions[t] = mode == MaskMode::kPrune ? TypeAction::kPrune : TypeAction::kUniform;
  return compile_actions(typing, actions);
}

MaskSpec make_distance_mask(const HeadTyping& typing,
                            const std::map<TypeName, ScopeDirective>& per_type_scope) {
  std::map<TypeName, TypeAction> actions;
  for (const auto& [t, d] : per_type_scope) {
    actions[t] = d == ScopeDirective::kAblateIntra   ? TypeAction::kAblateIntra
                 : d == ScopeDirective::kAblateInter ? TypeAction::kAblateInter
                                                     : TypeAction::kKeep;
  }
  return compile_actions(typing, actions);
}

AttentionSample apply_mask(const AttentionSample& sample, const MaskSpec& spec) {
  if (spec.num_layers != sample.num_layers || spec.num_heads != sample.num_heads) {
    throw ShapeError(fmt::format("mask is for {}x{} heads, sample '{}' has {}x{}", spec.num_layers,
                                 spec.num_heads, sample.sample_id, sample.num_layers, sample.num_heads));
  }
  const std::size_t len = sample.length();
  if (sample.weights.size() != sample.num_layers * sample.num_heads * len * len) {
    throw ShapeError(fmt::format("sample '{}': weight buffer does not match dims", sample.sample_id));
  }
  const auto& opt = spec.options;

  // Scope class per (source, target): 0 = never ablated, 1 = intra, 2 = inter.
  std::vector<std::uint8_t> scope_class(len * len, 0);
  for (std::size_t s = 0; s < len; ++s) {
    for (std::size_t u = 0; u < len; ++u) {
      const std::int32_t a = sample.tokens[s].sentence_id;
      const std::int32_t b = sample.tokens[u].sentence_id;
      std::uint8_t cls;
      if (opt.protected_sentence_ids.contains(a) || opt.protected_sentence_ids.contains(b)) {
        cls = 0;
      } else if (a < 0 || b < 0) {
        cls = opt.preserve_special_targets ? 0 : 2;
      } else {
        cls = a == b ? 1 : 2;
      }
      scope_class[s * len + u] = cls;
    }
  }

  AttentionSample out = sample;
  for (std::size_t l = 0; l < sample.num_layers; ++l) {
    for (std::size_t h = 0; h < sample.num_heads; ++h) {
      const HeadDirective& d = spec.at({l, h});
      if (d.mode == MaskMode::kKeep) continue;
      auto m = out.head(l, h);
      if (d.mode == MaskMode::kUniform) {
        if (d.scope != MaskScope::kAll) throw DomainError("uniform substitution requires scope all");
        std::fill(m.begin(), m.end(), 1.0 / static_cast<double>(len));
      } else if (d.scope == MaskScope::kAll) {
        std::fill(m.begin(), m.end(), 0.0);
      } else {
        const std::uint8_t target = d.scope == MaskScope::kIntra ? 1 : 2;
        for (std::size_t i = 0; i < m.size(); ++i) {
          if (scope_class[i] == target) m[i] = 0.0;
        }
      }
      if (opt.renormalize_rows) {
        for (std::size_t s = 0; s < len; ++s) {
          auto row = m.subspan(s * len, len);
          double sum = 0.0;
          for (double v : row) sum += v;
          if (sum > 0.0) {
            for (double& v : row) v /= sum;
          }
        }
      }
    }
  }
  return out;
}

std::vector<ExperimentPlan> table_plans() {
  using T = TypeName;
  using A = TypeAction;
  return {
      plan("p01", "baseline", {}),
      plan("p02", "prune dense", {{T::kDense, A::kPrune}}),
      plan("p03", "prune diagonal", {{T::kDiagonal, A::kPrune}}),
      plan("p04", "prune dense_vertical", {{T::kDenseVertical, A::kPrune}}),
      plan("p05", "prune vertical", {{T::kVertical, A::kPrune}}),
      plan("p06", "prune dense and vertical", {{T::kDense, A::kPrune}, {T::kVertical, A::kPrune}}),
      plan("p07", "prune dense_vertical and vertical",
           {{T::kDenseVertical, A::kPrune}, {T::kVertical, A::kPrune}}),
      plan("p08", "substitute dense with uniform 1/L", {{T::kDense, A::kUniform}}),
      plan("p09", "substitute diagonal with uniform 1/L", {{T::kDiagonal, A::kUniform}}),
      plan("p10", "substitute dense_vertical with uniform 1/L", {{T::kDenseVertical, A::kUniform}}),
      plan("p11", "substitute vertical with uniform 1/L", {{T::kVertical, A::kUniform}}),
      plan("p12", "remove intra-sentence attention of diagonal", {{T::kDiagonal, A::kAblateIntra}}),
      plan("p13", "remove inter-sentence attention of diagonal", {{T::kDiagonal, A::kAblateInter}}),
      plan("p14", "remove intra-sentence attention of dense_vertical",
           {{T::kDenseVertical, A::kAblateIntra}}),
      plan("p15", "remove inter-sentence attention of dense_vertical",
           {{T::kDenseVertical, A::kAblateInter}}),
      plan("p16", "remove intra-sentence attention of every type but diagonal",
           all_but(T::kDiagonal, A::kAblateIntra)),
      plan("p17", "remove inter-sentence attention of every type but diagonal",
           all_but(T::kDiagonal, A::kAblateInter)),
      plan("p18", "remove intra-sentence attention of every type but dense_vertical",
           all_but(T::kDenseVertical, A::kAblateIntra)),
      plan("p19", "remove inter-sentence attention of every type but dense_vertical",
           all_but(T::kDenseVertical, A::kAblateInter)),
  };
}

MaskSpec compile_plan(const ExperimentPlan& plan, const HeadTyping& typing) {
  return compile_actions(typing, plan.actions);
}

std::string mask_spec_to_json(const MaskSpec& spec) {
  json j;
  j["format"] = std::string(kMaskFormat);
  j["num_layers"] = spec.num_layers;
  j["num_heads"] = spec.num_heads;
  j["options"] = {{"renormalize_rows", spec.options.renormalize_rows},
                  {"preserve_special_targets", spec.options.preserve_special_targets},
                  {"protected_sentence_ids", spec.options.protected_sentence_ids}};
  j["entries"] = json::array();
  for (const auto& [id, d] : spec.entries) {
    j["entries"].push_back({{"layer", id.layer},
                            {"head", id.head},
                            {"mode", std::string(mask_mode_name(d.mode))},
                            {"scope", std::string(mask_scope_name(d.scope))}});
  }
  return j.dump(2) + "\n";
}

MaskSpec mask_spec_from_json(std::string_view text) {
  MaskSpec spec;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kMaskFormat) throw FormatError("not a mask spec");
    spec.num_layers = j.at("num_layers").get<std::size_t>();
    spec.num_heads = j.at("num_heads").get<std::size_t>();
    const auto& o = j.at("options");
    spec.options.renormalize_rows = o.at("renormalize_rows").get<bool>();
    spec.options.preserve_special_targets = o.at("preserve_special_targets").get<bool>();
    spec.options.protected_sentence_ids = o.at("protected_sentence_ids").get<std::set<std::int32_t>>();
    for (const auto& e : j.at("entries")) {
      const HeadId id{e.at("layer").get<std::size_t>(), e.at("head").get<std::size_t>()};
      const HeadDirective d{parse_mask_mode(e.at("mode").get<std::string>()),
                            parse_mask_scope(e.at("scope").get<std::string>())};
      if (!spec.entries.emplace(id, d).second) {
        throw FormatError(fmt::format("duplicate mask entry layer {} head {}", id.layer, id.head));
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("malformed mask spec: {}", e.what()));
  }
  check_mask_spec(spec);
  return spec;
}

}  // namespace attnscope

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

#include "attnscope/feature.hpp"

#include <fmt/format.h>

#include "attnscope/error.hpp"

namespace attnscope {

std::vector<double> DistanceFeature::to_vector() const {
  std::vector<double> v;
  v.reserve(kFirstWindowColumn + window_mass.size());
  v.push_back(self_mass);
  v.insert(v.end(), special_mass.begin(), special_mass.end());
  v.insert(v.end(), window_mass.begin(), window_mass.end());
  return v;
}

DistanceFeature DistanceFeature::from_vector(std::span<const double> v) {
  if (v.size() < kFirstWindowColumn + 1) throw ShapeError("feature vector too short");
  DistanceFeature f;
  f.self_mass = v[kSelfColumn];
  for (std::size_t k = 0; k < 4; ++k) f.special_mass[k] = v[kFirstSpecialColumn + k];
  f.window_mass.assign(v.begin() + kFirstWindowColumn, v.end());
  return f;
}

double DistanceFeature::total() const {
  double acc = self_mass;
  for (double m : special_mass) acc += m;
  for (double m : window_mass) acc += m;
  return acc;
}

std::vector<std::string> feature_column_names(const FeatureConfig& cfg) {
  std::vector<std::string> names = {"self", "cls", "sep", "comma", "period"};
  for (std::size_t i = 0; i < cfg.num_windows; ++i) names.push_back(fmt::format("w{:02d}", i));
  return names;
}

std::size_t window_index(std::size_t distance, std::size_t length, std::size_t num_windows) {
  if (num_windows == 0) throw DomainError("num_windows must be >= 1");
  if (distance < 1 || distance + 1 > length) {
    throw DomainError(fmt::format("distance {} outside [1, {}]", distance, length - 1));
  }
  return std::min(distance * num_windows / length, num_windows - 1);
}

DistanceFeature sample_feature(std::span<const double> weights, std::span<const TokenMeta> tokens,
                               const FeatureConfig& cfg) {
  if (cfg.num_windows == 0) throw DomainError("num_windows must be >= 1");
  const std::size_t len = tokens.size();
  if (len == 0 || weights.size() != len * len) {
    throw ShapeError(fmt::format("attention has {} entries, expected {}x{}", weights.size(), len, len));
  }
  const std::size_t dim = cfg.dimension();

  // Column a target lands in when it is not the source itself.
  std::vector<std::size_t> special_col(len, 0);
  for (std::size_t u = 0; u < len; ++u) {
    for (std::size_t k = 0; k < 4; ++k) {
      if (tokens[u].special_kind == kSpecialOrder[k]) special_col[u] = kFirstSpecialColumn + k;
    }
  }
  std::vector<std::size_t> window_col(len, 0);
  for (std::size_t t = 1; t < len; ++t) {
    window_col[t] = kFirstWindowColumn + window_index(t, len, cfg.num_windows);
  }

  std::vector<double> total(dim, 0.0);
  std::vector<double> row(dim);
  std::size_t sources = 0;
  for (std::size_t s = 0; s < len; ++s) {
    if (cfg.exclude_special_sources && tokens[s].is_special()) continue;
    ++sources;
    std::fill(row.begin(), row.end(), 0.0);
    const auto w = weights.subspan(s * len, len);
    for (std::size_t u = 0; u < len; ++u) {
      std::size_t col;
      if (u == s) {
        col = kSelfColumn;
      } else if (special_col[u] != 0) {
        col = special_col[u];
      } else {
        col = window_col[u > s ? u - s : s - u];
      }
      row[col] += w[u];
    }
    for (std::size_t c = 0; c < dim; ++c) total[c] += row[c];
  }
  if (sources == 0) throw DomainError("no non-special source tokens to average over");
  for (double& v : total) v /= static_cast<double>(sources);
  return DistanceFeature::from_vector(total);
}

DistanceFeature head_feature(const AttentionBundle& bundle, HeadId id, const FeatureConfig& cfg) {
  if (bundle.samples.empty()) throw EmptyInputError("bundle has no samples");
  if (id.layer >= bundle.num_layers || id.head >= bundle.num_heads) {
    throw DomainError(fmt::format("head ({}, {}) outside {}x{}", id.layer, id.head,
                                  bundle.num_layers, bundle.num_heads));
  }
  std::vector<double> acc(cfg.dimension(), 0.0);
  for (const auto& s : bundle.samples) {
    if (s.num_layers != bundle.num_layers || s.num_heads != bundle.num_heads) {
      throw ShapeError(fmt::format("sample '{}' dims differ from bundle", s.sample_id));
    }
    const auto f = sample_feature(s.head(id.layer, id.head), s.tokens, cfg).to_vector();
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += f[c];
  }
  for (double& v : acc) v /= static_cast<double>(bundle.samples.size());
  return DistanceFeature::from_vector(acc);
}

Matrix feature_matrix(const AttentionBundle& bundle, const FeatureConfig& cfg) {
  const std::size_t heads = bundle.num_layers * bundle.num_heads;
  Matrix out(heads, cfg.dimension());
  for (std::size_t r = 0; r < heads; ++r) {
    const auto f = head_feature(bundle, {r / bundle.num_heads, r % bundle.num_heads}, cfg).to_vector();
    std::copy(f.begin(), f.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace attnscope

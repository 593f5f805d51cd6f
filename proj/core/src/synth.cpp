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

#include "attnscope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "attnscope/error.hpp"
#include "attnscope/rng.hpp"

namespace attnscope {

namespace {

void normalize_rows(std::vector<double>& m, std::size_t len) {
  for (std::size_t s = 0; s < len; ++s) {
    double sum = 0.0;
    for (std::size_t u = 0; u < len; ++u) sum += m[s * len + u];
    for (std::size_t u = 0; u < len; ++u) m[s * len + u] /= sum;
  }
}

std::vector<double> vertical(std::span<const TokenMeta> tokens) {
  const std::size_t len = tokens.size();
  std::vector<double> m(len * len, 0.0);
  for (std::size_t s = 0; s < len; ++s) {
    for (std::size_t u = 0; u < len; ++u) m[s * len + u] = tokens[u].is_special() ? 1.0 : 0.0;
  }
  normalize_rows(m, len);
  return m;
}

std::vector<double> dense(std::span<const TokenMeta> tokens, const SynthParams& p) {
  const std::size_t len = tokens.size();
  std::vector<double> m(len * len);
  for (std::size_t s = 0; s < len; ++s) {
    for (std::size_t u = 0; u < len; ++u) {
      const double d = static_cast<double>(s > u ? s - u : u - s) / static_cast<double>(len);
      double w = std::pow(d, p.dense_exponent) + p.dense_floor;
      if (tokens[u].is_special()) w *= p.dense_special_scale;
      m[s * len + u] = w;
    }
  }
  normalize_rows(m, len);
  return m;
}

std::vector<double> diagonal(std::size_t len, std::size_t bandwidth) {
  std::vector<double> m(len * len, 0.0);
  for (std::size_t s = 0; s < len; ++s) {
    for (std::size_t u = 0; u < len; ++u) {
      const std::size_t d = s > u ? s - u : u - s;
      if (d <= bandwidth) m[s * len + u] = 1.0 / static_cast<double>(1 + d);
    }
  }
  normalize_rows(m, len);
  return m;
}

}  // namespace

std::string_view pattern_name(PatternKind k) {
  switch (k) {
    case PatternKind::kDiagonal: return "diagonal_gen";
    case PatternKind::kVertical: return "vertical_gen";
    case PatternKind::kDense: return "dense_gen";
    case PatternKind::kDenseVertical: return "dense_vertical_gen";
  }
  return "diagonal_gen";
}

PatternKind parse_pattern(std::string_view name) {
  for (PatternKind k : kAllPatterns) {
    if (pattern_name(k) == name) return k;
  }
  throw DomainError(fmt::format("unknown pattern '{}'", name));
}

TypeName expected_type(PatternKind k) {
  switch (k) {
    case PatternKind::kDiagonal: return TypeName::kDiagonal;
    case PatternKind::kVertical: return TypeName::kVertical;
    case PatternKind::kDense: return TypeName::kDense;
    case PatternKind::kDenseVertical: return TypeName::kDenseVertical;
  }
  return TypeName::kDense;
}

std::vector<TokenMeta> synth_tokens(std::size_t length, const std::vector<std::size_t>& special_positions) {
  std::set<std::size_t> specials;
  for (std::size_t p : special_positions) {
    if (p >= length) throw DomainError(fmt::format("special position {} outside length {}", p, length));
    if (!specials.insert(p).second) throw DomainError(fmt::format("special position {} repeated", p));
  }
  std::vector<TokenMeta> tokens;
  tokens.reserve(length);
  std::int32_t sentence = 0;
  std::size_t punct = 0;
  for (std::size_t i = 0; i < length; ++i) {
    if (!specials.contains(i)) {
      tokens.push_back(TokenMeta::make(fmt::format("tok{}", i), sentence));
    } else if (i == 0) {
      tokens.push_back(TokenMeta::make("[CLS]", -1));
    } else if (i + 1 == length) {
      tokens.push_back(TokenMeta::make("[SEP]", -1));
    } else if (punct++ % 2 == 0) {
      tokens.push_back(TokenMeta::make(".", sentence));
      ++sentence;
    } else {
      tokens.push_back(TokenMeta::make(",", sentence));
    }
  }
  return tokens;
}

std::vector<double> gen_matrix(PatternKind kind, std::span<const TokenMeta> tokens, double noise,
                               std::uint64_t seed, const SynthParams& params) {
  const std::size_t len = tokens.size();
  if (len < 4) throw DomainError(fmt::format("synthetic length {} < 4", len));
  if (!(noise >= 0.0 && noise < 1.0)) throw DomainError("noise must lie in [0, 1)");
  const bool any_special = std::any_of(tokens.begin(), tokens.end(), [](const TokenMeta& t) { return t.is_special(); });
  if (!any_special && (kind == PatternKind::kVertical || kind == PatternKind::kDenseVertical)) {
    throw DomainError("vertical patterns need at least one special position");
  }

  std::vector<double> m;
  switch (kind) {
    case PatternKind::kDiagonal: m = diagonal(len, params.bandwidth); break;
    case PatternKind::kVertical: m = vertical(tokens); break;
    case PatternKind::kDense: m = dense(tokens, params); break;
    case PatternKind::kDenseVertical: {
      m = dense(tokens, params);
      const auto v = vertical(tokens);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = params.dense_share * m[i] + (1.0 - params.dense_share) * v[i];
      break;
    }
  }
  if (noise > 0.0) {
    Rng rng(seed);
    std::vector<double> r(len * len);
    for (double& v : r) v = rng.uniform();
    normalize_rows(r, len);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (1.0 - noise) * m[i] + noise * r[i];
  }
  normalize_rows(m, len);
  return m;
}

AttentionSample gen_sample(PatternKind kind, std::size_t length, double noise, std::uint64_t seed,
                           const std::vector<std::size_t>& special_positions, const SynthParams& params) {
  if (length < 4) throw DomainError(fmt::format("synthetic length {} < 4", length));
  AttentionSample s;
  s.sample_id = fmt::format("{}-{}", pattern_name(kind), seed);
  s.num_layers = 1;
  s.num_heads = 1;
  s.tokens = synth_tokens(length, special_positions);
  s.weights = gen_matrix(kind, s.tokens, noise, seed, params);
  return s;
}

PlantedBundle gen_bundle(std::size_t heads_per_kind, std::size_t length, std::size_t samples,
                         double noise, std::uint64_t seed, const SynthParams& params) {
  if (heads_per_kind < 1) throw DomainError("heads_per_kind must be >= 1");
  if (length < 4) throw DomainError(fmt::format("synthetic length {} < 4", length));
  const std::size_t heads = 4 * heads_per_kind;
  PlantedBundle out;
  out.bundle.model_name = fmt::format("synth-h{}-L{}-n{}-s{}", heads_per_kind, length, samples, seed);
  out.bundle.num_layers = 1;
  out.bundle.num_heads = heads;
  for (std::size_t h = 0; h < heads; ++h) out.planted[{0, h}] = kAllPatterns[h % 4];

  const std::size_t interior = std::max<std::size_t>(1, length / 8);
  for (std::size_t i = 0; i < samples; ++i) {
    Rng rng = Rng::derive(seed, i);
    std::vector<std::size_t> pool(length - 2);
    std::iota(pool.begin(), pool.end(), 1);
    for (std::size_t j = 0; j < interior; ++j) std::swap(pool[j], pool[j + rng.below(pool.size() - j)]);
    std::vector<std::size_t> positions(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(interior));
    positions.push_back(0);
    positions.push_back(length - 1);

    AttentionSample s;
    s.sample_id = fmt::format("synth-{:05d}", i);
    s.num_layers = 1;
    s.num_heads = heads;
    s.tokens = synth_tokens(length, positions);
    s.weights.reserve(heads * length * length);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::uint64_t head_seed = Rng::mix(rng.next() ^ h);
      const auto m = gen_matrix(kAllPatterns[h % 4], s.tokens, noise, head_seed, params);
      s.weights.insert(s.weights.end(), m.begin(), m.end());
    }
    out.bundle.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace attnscope

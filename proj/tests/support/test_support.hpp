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

// Shared fixtures and independent oracles for the unit and acceptance tests.
// Oracles here deliberately avoid calling the library routine they check.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <utility>
#include <string>
#include <string_view>
#include <vector>

#include "attnscope/ablation.hpp"
#include "attnscope/matrix.hpp"
#include "attnscope/rng.hpp"
#include "attnscope/tensor_io.hpp"

namespace attnscope::testing {

// Row-wise softmax of N(0, scale^2) logits, the way a real attention layer
// produces its weights.
inline std::vector<double> softmax_rows(std::size_t rows, std::size_t cols, Rng& rng, double scale = 2.0) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    double mx = -INFINITY;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = scale * rng.normal();
      mx = std::max(mx, row[c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      z += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= z;
  }
  return out;
}

// Tokens with [CLS] first, [SEP] last and a random sprinkling of interior
// specials; sentence ids advance after each ".".
inline std::vector<TokenMeta> random_tokens(std::size_t length, Rng& rng, double special_rate = 0.15) {
  static constexpr std::array<std::string_view, 4> kInterior = {",", ".", "[SEP]", "[CLS]"};
  std::vector<TokenMeta> tokens;
  std::int32_t sentence = 0;
  for (std::size_t i = 0; i < length; ++i) {
    if (i == 0) {
      tokens.push_back(TokenMeta::make("[CLS]", -1));
    } else if (i + 1 == length) {
      tokens.push_back(TokenMeta::make("[SEP]", -1));
    } else if (rng.uniform() < special_rate) {
      const std::string_view s = kInterior[rng.below(kInterior.size())];
      const bool bracket = s.front() == '[';
      tokens.push_back(TokenMeta::make(std::string(s), bracket ? -1 : sentence));
      if (s == ".") ++sentence;
    } else {
      tokens.push_back(TokenMeta::make("w" + std::to_string(i), sentence));
    }
  }
  return tokens;
}

inline AttentionSample softmax_sample(std::string id, std::size_t layers, std::size_t heads,
                                      std::vector<TokenMeta> tokens, Rng& rng) {
  AttentionSample s;
  s.sample_id = std::move(id);
  s.num_layers = layers;
  s.num_heads = heads;
  s.tokens = std::move(tokens);
  const std::size_t l = s.tokens.size();
  for (std::size_t i = 0; i < layers * heads; ++i) {
    const auto w = softmax_rows(l, l, rng);
    s.weights.insert(s.weights.end(), w.begin(), w.end());
  }
  return s;
}

// Brute-force distance-feature oracle: enumerates every (source, target) pair
// and routes it by the rules self > special > window, with the window index
// computed in exact integer arithmetic. Returns [self, cls, sep, comma, period,
// w0..w{N-1}] plus, per pair, the number of buckets it was routed to.
struct OracleFeature {
  std::vector<double> values;
  std::size_t pairs_routed_once = 0;
  std::size_t pairs_total = 0;
};

inline OracleFeature brute_force_feature(const std::vector<double>& w, const std::vector<TokenMeta>& tokens,
                                         std::size_t n_windows, bool exclude_special_sources = false) {
  const std::size_t l = tokens.size();
  std::vector<double> acc(5 + n_windows, 0.0);
  OracleFeature out;
  std::size_t sources = 0;
  for (std::size_t s = 0; s < l; ++s) {
    if (exclude_special_sources && tokens[s].special_kind != SpecialKind::kNone) continue;
    ++sources;
    std::vector<double> row(5 + n_windows, 0.0);
    for (std::size_t u = 0; u < l; ++u) {
      std::size_t hits = 0;
      std::size_t bucket = 0;
      if (u == s) {
        bucket = 0;
        ++hits;
      }
      if (hits == 0) {
        switch (tokens[u].surface == "[CLS]" ? 1 : tokens[u].surface == "[SEP]" ? 2
                                                : tokens[u].surface == ","      ? 3
                                                : tokens[u].surface == "."      ? 4
                                                                                : 0) {
          case 1: bucket = 1; ++hits; break;
          case 2: bucket = 2; ++hits; break;
          case 3: bucket = 3; ++hits; break;
          case 4: bucket = 4; ++hits; break;
          default: break;
        }
      }
      if (hits == 0) {
        const std::size_t t = s > u ? s - u : u - s;
        // Largest i with i*L <= t*N, capped at N-1.
        std::size_t i = 0;
        while (i + 1 < n_windows && (i + 1) * l <= t * n_windows) ++i;
        bucket = 5 + i;
        ++hits;
      }
      if (hits == 1) ++out.pairs_routed_once;
      ++out.pairs_total;
      row[bucket] += w[s * l + u];
    }
    for (std::size_t j = 0; j < row.size(); ++j) acc[j] += row[j];
  }
  for (auto& v : acc) v /= static_cast<double>(sources);
  out.values = std::move(acc);
  return out;
}

// Isotropic Gaussian blobs; returns points row-major and the generating labels.
struct Blobs {
  Matrix x;
  std::vector<std::size_t> labels;
  Matrix centers;
};

inline Blobs make_blobs(std::size_t k, std::size_t per_blob, std::size_t dim, double spread, double sigma,
                        std::uint64_t seed) {
  Rng rng(seed);
  Blobs b;
  b.centers = Matrix(k, dim);
  for (auto& v : b.centers.data()) v = spread * rng.normal();
  b.x = Matrix(k * per_blob, dim);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      const std::size_t r = c * per_blob + i;
      for (std::size_t d = 0; d < dim; ++d) b.x(r, d) = b.centers(c, d) + sigma * rng.normal();
      b.labels.push_back(c);
    }
  }
  return b;
}

inline double min_center_distance(const Matrix& centers) {
  double best = INFINITY;
  for (std::size_t a = 0; a < centers.rows(); ++a) {
    for (std::size_t b = a + 1; b < centers.rows(); ++b) {
      best = std::min(best, std::sqrt(squared_distance(centers.row(a), centers.row(b))));
    }
  }
  return best;
}

// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("attnscope-" + std::string(tag) + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// All regular files under dir, relative path -> bytes, in sorted order.
inline std::vector<std::pair<std::string, std::string>> snapshot_dir(const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out.emplace_back(std::filesystem::relative(e.path(), dir).generic_string(), slurp(e.path()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Minimal XML well-formedness check: balanced, properly nested elements,
// quoted attributes, exactly one root element. Returns the root tag name, or
// an empty string when malformed.
inline std::string xml_root_if_well_formed(std::string_view doc) {
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < doc.size() && std::isspace(static_cast<unsigned char>(doc[i]))) ++i;
  };
  std::vector<std::string> stack;
  std::string root;
  std::size_t roots = 0;
  skip_ws();
  if (doc.substr(i, 5) == "<?xml") {
    const auto end = doc.find("?>", i);
    if (end == std::string_view::npos) return {};
    i = end + 2;
  }
  while (i < doc.size()) {
    if (doc[i] != '<') {
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(doc[i]))) return {};
      if (doc[i] == '&') {
        const auto semi = doc.find(';', i);
        if (semi == std::string_view::npos || semi - i > 8) return {};
      }
      ++i;
      continue;
    }
    if (doc.substr(i, 4) == "<!--") {
      const auto end = doc.find("-->", i);
      if (end == std::string_view::npos) return {};
      i = end + 3;
      continue;
    }
    if (doc.substr(i, 2) == "</") {
      const auto end = doc.find('>', i);
      if (end == std::string_view::npos || stack.empty()) return {};
      std::string name(doc.substr(i + 2, end - i - 2));
      while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
      if (name != stack.back()) return {};
      stack.pop_back();
      i = end + 1;
      continue;
    }
    ++i;
    std::string name;
    while (i < doc.size() && (std::isalnum(static_cast<unsigned char>(doc[i])) || doc[i] == '-' || doc[i] == ':' ||
                              doc[i] == '_')) {
      name += doc[i++];
    }
    if (name.empty()) return {};
    bool self_closing = false;
    while (true) {
      skip_ws();
      if (i >= doc.size()) return {};
      if (doc[i] == '>') {
        ++i;
        break;
      }
      if (doc.substr(i, 2) == "/>") {
        self_closing = true;
        i += 2;
        break;
      }
      std::size_t a = i;
      while (i < doc.size() && doc[i] != '=' && !std::isspace(static_cast<unsigned char>(doc[i])) && doc[i] != '>') ++i;
      if (a == i || i >= doc.size() || doc[i] != '=') return {};
      ++i;
      if (i >= doc.size() || (doc[i] != '"' && doc[i] != '\'')) return {};
      const char q = doc[i++];
      const auto close = doc.find(q, i);
      if (close == std::string_view::npos) return {};
      if (doc.substr(i, close - i).find('<') != std::string_view::npos) return {};
      i = close + 1;
    }
    if (stack.empty()) {
      ++roots;
      root = name;
    }
    if (!self_closing) stack.push_back(name);
  }
  if (!stack.empty() || roots != 1) return {};
  return root;
}

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string_view::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

// Exhaustive search over all k! relabelings; the lexicographically smallest
// permutation wins ties because std::next_permutation enumerates in order.
inline std::vector<std::size_t> exhaustive_align(const std::vector<std::size_t>& ref,
                                                 const std::vector<std::size_t>& other, std::size_t k) {
  std::vector<std::size_t> perm(k), best;
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best_hits = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) hits += ref[i] == perm[other[i]];
    if (best.empty() || hits > best_hits) {
      best_hits = hits;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Hand transcription of the 19 ablation plan rows. Columns: dense, diagonal,
// dense_vertical, vertical. K keep, P prune, U uniform 1/L, I remove
// intra-sentence attention, E remove inter-sentence attention.
inline const std::vector<std::pair<std::string, std::string>>& plan_table() {
  static const std::vector<std::pair<std::string, std::string>> kTable = {
      {"p01", "KKKK"}, {"p02", "PKKK"}, {"p03", "KPKK"}, {"p04", "KKPK"}, {"p05", "KKKP"},
      {"p06", "PKKP"}, {"p07", "KKPP"}, {"p08", "UKKK"}, {"p09", "KUKK"}, {"p10", "KKUK"},
      {"p11", "KKKU"}, {"p12", "KIKK"}, {"p13", "KEKK"}, {"p14", "KKIK"}, {"p15", "KKEK"},
      {"p16", "IKII"}, {"p17", "EKEE"}, {"p18", "IIKI"}, {"p19", "EEKE"},
  };
  return kTable;
}

inline HeadDirective plan_directive(char code) {
  switch (code) {
    case 'P': return {MaskMode::kPrune, MaskScope::kAll};
    case 'U': return {MaskMode::kUniform, MaskScope::kAll};
    case 'I': return {MaskMode::kPrune, MaskScope::kIntra};
    case 'E': return {MaskMode::kPrune, MaskScope::kInter};
    default: return {MaskMode::kKeep, MaskScope::kAll};
  }
}

// Entry-by-entry expectation for scoped pruning, written from the masking
// rules rather than from the library code.
inline bool scoped_entry_ablated(std::int32_t a, std::int32_t b, MaskScope scope, const MaskOptions& opt) {
  if (opt.protected_sentence_ids.count(a) || opt.protected_sentence_ids.count(b)) return false;
  if (a < 0 || b < 0) return !opt.preserve_special_targets && scope == MaskScope::kInter;
  return (a == b) == (scope == MaskScope::kIntra);
}

// Random sentence layout: [CLS], words and "." in sentences 0.., stray
// "[SEP]"s, closing [SEP].
inline std::vector<TokenMeta> random_layout(Rng& rng, std::size_t len) {
  std::vector<TokenMeta> t;
  std::int32_t sentence = 0;
  t.push_back(TokenMeta::make("[CLS]", -1));
  for (std::size_t i = 1; i + 1 < len; ++i) {
    const double u = rng.uniform();
    if (u < 0.1) {
      t.push_back(TokenMeta::make("[SEP]", -1));
    } else if (u < 0.3) {
      t.push_back(TokenMeta::make(".", sentence++));
    } else {
      t.push_back(TokenMeta::make("w", sentence));
    }
  }
  t.push_back(TokenMeta::make("[SEP]", -1));
  return t;
}

}  // namespace attnscope::testing

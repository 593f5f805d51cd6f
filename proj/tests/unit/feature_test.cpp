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

#include <gtest/gtest.h>

#include <numeric>

#include "attnscope/error.hpp"
#include "attnscope/feature.hpp"
#include "attnscope/rng.hpp"
#include "attnscope/synth.hpp"
#include "test_support.hpp"

namespace attnscope {
namespace {

using testing::brute_force_feature;
using testing::random_tokens;
using testing::softmax_rows;
using testing::softmax_sample;

std::vector<TokenMeta> plain_tokens(std::size_t len) {
  std::vector<TokenMeta> t;
  for (std::size_t i = 0; i < len; ++i) t.push_back(TokenMeta::make("w" + std::to_string(i), 0));
  return t;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(WindowIndex, HandExamples) {
  EXPECT_EQ(window_index(1, 32, 16), 0u);
  EXPECT_EQ(window_index(31, 32, 16), 15u);
  EXPECT_EQ(window_index(5, 8, 16), 10u);
  EXPECT_EQ(window_index(2, 32, 16), 1u);
  EXPECT_EQ(window_index(99, 100, 16), 15u);
  // L < N: high buckets unreachable, no clamp needed.
  EXPECT_EQ(window_index(7, 8, 16), 14u);
}

TEST(WindowIndex, OutOfRangeIsDomainError) {
  EXPECT_THROW(window_index(0, 32, 16), DomainError);
  EXPECT_THROW(window_index(32, 32, 16), DomainError);
  EXPECT_THROW(window_index(1, 32, 0), DomainError);
}

TEST(WindowIndex, BucketsPartitionDistances) {
  for (std::size_t len : {2u, 5u, 16u, 17u, 64u, 129u}) {
    for (std::size_t n : {1u, 3u, 16u, 40u}) {
      std::size_t prev = 0;
      for (std::size_t t = 1; t < len; ++t) {
        const std::size_t b = window_index(t, len, n);
        EXPECT_LT(b, n);
        EXPECT_GE(b, prev);  // monotone in distance
        prev = b;
      }
    }
  }
}

TEST(Dimensionality, SixteenWindowsGiveTwentyOne) {
  const FeatureConfig cfg;
  EXPECT_EQ(cfg.dimension(), 21u);
  const auto names = feature_column_names(cfg);
  ASSERT_EQ(names.size(), 21u);
  EXPECT_EQ(names[0], "self");
  EXPECT_EQ(names[1], "cls");
  EXPECT_EQ(names[2], "sep");
  EXPECT_EQ(names[3], "comma");
  EXPECT_EQ(names[4], "period");
  EXPECT_EQ(names[5], "w00");
  EXPECT_EQ(names[20], "w15");
}

TEST(SampleFeature, IdentityIsAllSelf) {
  std::vector<double> w(64, 0.0);
  for (std::size_t i = 0; i < 8; ++i) w[i * 8 + i] = 1.0;
  const auto f = sample_feature(w, plain_tokens(8));
  EXPECT_EQ(f.self_mass, 1.0);
  EXPECT_EQ(f.total(), 1.0);
  for (double v : f.special_mass) EXPECT_EQ(v, 0.0);
  for (double v : f.window_mass) EXPECT_EQ(v, 0.0);
}

TEST(SampleFeature, SelfOutranksSpecial) {
  auto tokens = plain_tokens(8);
  tokens[0] = TokenMeta::make("[CLS]", -1);
  std::vector<double> w(64, 0.0);
  for (std::size_t s = 0; s < 8; ++s) w[s * 8 + 0] = 1.0;
  const auto f = sample_feature(w, tokens);
  EXPECT_DOUBLE_EQ(f.self_mass, 0.125);
  EXPECT_DOUBLE_EQ(f.special_mass[0], 0.875);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(f.special_mass[i], 0.0);
  for (double v : f.window_mass) EXPECT_EQ(v, 0.0);
}

TEST(SampleFeature, MatchesBruteForceOracleOnTwelveTokens) {
  Rng rng(12);
  auto tokens = plain_tokens(12);
  tokens[4] = TokenMeta::make("[SEP]", -1);
  tokens[7] = TokenMeta::make(",", 0);
  const auto w = softmax_rows(12, 12, rng);
  const auto oracle = brute_force_feature(w, tokens, 16);
  EXPECT_EQ(oracle.pairs_routed_once, oracle.pairs_total);
  EXPECT_LT(max_abs_diff(sample_feature(w, tokens).to_vector(), oracle.values), 1e-12);
}

TEST(SampleFeature, MatchesOracleOnRandomLayoutsAndWindowCounts) {
  Rng rng(2024);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t len = 2 + rng.below(60);
    const std::size_t n = 1 + rng.below(24);
    const bool exclude = rep % 3 == 0;
    const auto tokens = random_tokens(len, rng, 0.3);
    const auto w = softmax_rows(len, len, rng);
    const FeatureConfig cfg{n, exclude};
    const bool any_plain = std::any_of(tokens.begin(), tokens.end(), [](const TokenMeta& t) { return !t.is_special(); });
    if (exclude && !any_plain) {
      EXPECT_THROW(sample_feature(w, tokens, cfg), DomainError);
      continue;
    }
    const auto oracle = brute_force_feature(w, tokens, n, exclude);
    const auto got = sample_feature(w, tokens, cfg).to_vector();
    ASSERT_EQ(got.size(), cfg.dimension());
    EXPECT_LT(max_abs_diff(got, oracle.values), 1e-12) << "rep " << rep;
    EXPECT_NEAR(std::accumulate(got.begin(), got.end(), 0.0), 1.0, 1e-9);
    for (double v : got) EXPECT_GE(v, 0.0);
  }
}

TEST(SampleFeature, RelabellingTokenAsSepMovesMassOnly) {
  Rng rng(77);
  auto tokens = plain_tokens(20);
  const auto w = softmax_rows(20, 20, rng);
  const auto before = sample_feature(w, tokens);
  tokens[9] = TokenMeta::make("[SEP]", -1);
  const auto after = sample_feature(w, tokens);
  double column = 0.0;  // mass landing on token 9 from other sources
  for (std::size_t s = 0; s < 20; ++s) {
    if (s != 9) column += w[s * 20 + 9];
  }
  column /= 20.0;
  EXPECT_NEAR(after.special_mass[1], column, 1e-15);
  EXPECT_NEAR(after.total(), 1.0, 1e-12);
  const double windows_before = std::accumulate(before.window_mass.begin(), before.window_mass.end(), 0.0);
  const double windows_after = std::accumulate(after.window_mass.begin(), after.window_mass.end(), 0.0);
  EXPECT_NEAR(windows_before - windows_after, column, 1e-12);
  EXPECT_EQ(before.self_mass, after.self_mass);
}

TEST(SampleFeature, BandedDiagonalFillsFirstWindowOnly) {
  const std::size_t len = 64, n = 16, band = 3;  // band < L / N = 4
  std::vector<double> w(len * len, 0.0);
  for (std::size_t s = 0; s < len; ++s) {
    std::vector<std::size_t> cols;
    for (std::size_t u = s >= band ? s - band : 0; u <= std::min(len - 1, s + band); ++u) cols.push_back(u);
    for (auto u : cols) w[s * len + u] = 1.0 / static_cast<double>(cols.size());
  }
  const auto f = sample_feature(w, plain_tokens(len), {n, false});
  EXPECT_NEAR(f.self_mass + f.window_mass[0], 1.0, 1e-12);
  EXPECT_GT(f.window_mass[0], 0.0);
  for (std::size_t i = 1; i < n; ++i) EXPECT_EQ(f.window_mass[i], 0.0) << "window " << i;
}

TEST(SampleFeature, ShapeMismatchThrows) {
  std::vector<double> w(15, 0.0);
  EXPECT_THROW(sample_feature(w, plain_tokens(4)), ShapeError);
}

TEST(DistanceFeature, VectorRoundTrip) {
  DistanceFeature f;
  f.self_mass = 0.1;
  f.special_mass = {0.2, 0.1, 0.05, 0.05};
  f.window_mass = {0.25, 0.25};
  const auto v = f.to_vector();
  ASSERT_EQ(v.size(), 7u);
  const auto g = DistanceFeature::from_vector(v);
  EXPECT_EQ(g.to_vector(), v);
  EXPECT_DOUBLE_EQ(g.total(), 1.0);
}

AttentionBundle two_by_two_bundle(std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  AttentionBundle b;
  b.num_layers = 2;
  b.num_heads = 2;
  for (std::size_t i = 0; i < samples; ++i) {
    b.samples.push_back(softmax_sample("s" + std::to_string(i), 2, 2, random_tokens(5 + 3 * i, rng), rng));
  }
  return b;
}

TEST(HeadFeature, UnweightedMeanOverSamples) {
  const auto b = two_by_two_bundle(5, 31);
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t h = 0; h < 2; ++h) {
      std::vector<double> mean(21, 0.0);
      for (const auto& s : b.samples) {
        const auto o = brute_force_feature({s.head(l, h).begin(), s.head(l, h).end()}, s.tokens, 16);
        for (std::size_t j = 0; j < 21; ++j) mean[j] += o.values[j] / 5.0;
      }
      EXPECT_LT(max_abs_diff(head_feature(b, {l, h}).to_vector(), mean), 1e-12);
    }
  }
}

TEST(HeadFeature, IdenticalSamplesGiveSingleSampleFeature) {
  auto b = two_by_two_bundle(1, 5);
  const auto single = head_feature(b, {1, 0}).to_vector();
  b.samples.push_back(b.samples[0]);
  b.samples.push_back(b.samples[0]);
  EXPECT_LT(max_abs_diff(head_feature(b, {1, 0}).to_vector(), single), 1e-15);
}

TEST(HeadFeature, EmptyBundleThrows) {
  AttentionBundle b;
  b.num_layers = 1;
  b.num_heads = 1;
  EXPECT_THROW(head_feature(b, {0, 0}), EmptyInputError);
  EXPECT_THROW(feature_matrix(b), EmptyInputError);
}

TEST(FeatureMatrix, LayerMajorRowOrder) {
  // Plant head-specific patterns: (l, h) attends with distance 1 + 2*l + h
  // to the right (wrapping to self near the end) so each row has its own
  // dominant window.
  const std::size_t len = 32;
  AttentionSample s;
  s.sample_id = "planted";
  s.num_layers = 2;
  s.num_heads = 2;
  s.tokens = plain_tokens(len);
  s.weights.assign(4 * len * len, 0.0);
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t h = 0; h < 2; ++h) {
      const std::size_t d = 4 * (1 + 2 * l + h);
      auto m = s.head(l, h);
      for (std::size_t r = 0; r < len; ++r) m[r * len + (r + d < len ? r + d : r)] = 1.0;
    }
  }
  AttentionBundle b{"m", 2, 2, {s}};
  const Matrix fm = feature_matrix(b);
  ASSERT_EQ(fm.rows(), 4u);
  ASSERT_EQ(fm.cols(), 21u);
  for (std::size_t r = 0; r < 4; ++r) {
    const std::size_t expected_window = window_index(4 * (1 + r), len, 16);
    std::size_t argmax = kFirstWindowColumn;
    for (std::size_t c = kFirstWindowColumn; c < 21; ++c) {
      if (fm(r, c) > fm(r, argmax)) argmax = c;
    }
    EXPECT_EQ(argmax - kFirstWindowColumn, expected_window) << "row " << r;
    const auto hf = head_feature(b, {r / 2, r % 2}).to_vector();
    for (std::size_t c = 0; c < 21; ++c) EXPECT_EQ(fm(r, c), hf[c]);
  }
}

TEST(FeatureMatrix, ShapeForTwentyFourLayersBySixteenHeads) {
  Rng rng(1);
  AttentionBundle b;
  b.num_layers = 24;
  b.num_heads = 16;
  b.samples.push_back(softmax_sample("s", 24, 16, random_tokens(10, rng), rng));
  const Matrix fm = feature_matrix(b);
  EXPECT_EQ(fm.rows(), 384u);
  EXPECT_EQ(fm.cols(), 21u);
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    double sum = 0.0;
    for (double v : fm.row(r)) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

}  // namespace
}  // namespace attnscope

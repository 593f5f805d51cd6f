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

#include <cmath>

#include "attnscope/embedding.hpp"
#include "attnscope/error.hpp"
#include "attnscope/rng.hpp"
#include "test_support.hpp"

namespace attnscope {
namespace {

using testing::make_blobs;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = scale * rng.normal();
  return m;
}

// Shannon perplexity 2^H of row i of the conditional distribution implied by beta.
double row_perplexity(const Matrix& x, std::size_t i, double beta) {
  std::vector<double> p(x.rows(), 0.0);
  double z = 0.0;
  for (std::size_t j = 0; j < x.rows(); ++j) {
    if (j == i) continue;
    p[j] = std::exp(-beta * squared_distance(x.row(i), x.row(j)));
    z += p[j];
  }
  double h = 0.0;
  for (std::size_t j = 0; j < x.rows(); ++j) {
    if (j == i || p[j] <= 0.0) continue;
    const double q = p[j] / z;
    h -= q * std::log2(q);
  }
  return std::exp2(h);
}

// Trains a perceptron with bias; returns true when it separates the points.
bool perceptron_separates(const Matrix& y, const std::vector<std::size_t>& labels) {
  double w0 = 0.0, w1 = 0.0, b = 0.0;
  for (int epoch = 0; epoch < 10000; ++epoch) {
    std::size_t errors = 0;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      const double t = labels[i] == 0 ? -1.0 : 1.0;
      if (t * (w0 * y(i, 0) + w1 * y(i, 1) + b) <= 0.0) {
        w0 += t * y(i, 0);
        w1 += t * y(i, 1);
        b += t;
        ++errors;
      }
    }
    if (errors == 0) return true;
  }
  return false;
}

TEST(Affinities, SymmetricNormalisedAndOnTargetPerplexity) {
  const Matrix x = random_matrix(40, 21, 1);
  const auto a = tsne_affinities(x, 10.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_EQ(a.p(i, i), 0.0);
    for (std::size_t j = 0; j < 40; ++j) {
      EXPECT_EQ(a.p(i, j), a.p(j, i));
      EXPECT_GE(a.p(i, j), 0.0);
      sum += a.p(i, j);
    }
    EXPECT_NEAR(a.perplexity[i], 10.0, 1e-5);
    EXPECT_NEAR(row_perplexity(x, i, a.beta[i]), 10.0, 1e-5);
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Affinities, PerplexityMustBeBelowN) {
  const Matrix x = random_matrix(10, 3, 2);
  EXPECT_THROW(tsne_affinities(x, 10.0), DomainError);
  EXPECT_THROW(tsne(x, {.perplexity = 12.0}), DomainError);
}

TEST(Gradient, MatchesCentralFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x = random_matrix(25, 21, 10 + seed);
    const auto a = tsne_affinities(x, 8.0);
    const Matrix y = random_matrix(25, 2, 20 + seed, 2.0);
    const Matrix g = tsne_gradient(a.p, y);
    const double h = 1e-5;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      for (std::size_t c = 0; c < 2; ++c) {
        Matrix yp = y, ym = y;
        yp(i, c) += h;
        ym(i, c) -= h;
        const double fd = (tsne_kl(a.p, yp) - tsne_kl(a.p, ym)) / (2 * h);
        num += (fd - g(i, c)) * (fd - g(i, c));
        den += g(i, c) * g(i, c);
      }
    }
    EXPECT_LT(std::sqrt(num / den), 1e-4) << "seed " << seed;
  }
}

TEST(Tsne, FinalKlBelowInitialOnRandomInputs) {
  // Default schedule: 250 exaggerated steps, then 750 plain ones.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x = random_matrix(50, 21, 100 + seed);
    TsneConfig cfg;
    cfg.seed = seed;
    cfg.perplexity = 15.0;  // well below n so P is not near-uniform
    const auto r = tsne(x, cfg);
    EXPECT_LT(r.final_kl, r.initial_kl) << "seed " << seed;
    ASSERT_EQ(r.kl_trace.size(), 21u);  // start, then every 50 iterations
    EXPECT_EQ(r.kl_trace.front(), r.initial_kl);
    EXPECT_EQ(r.kl_trace.back(), r.final_kl);
  }
}

TEST(Tsne, OutputCentredAndDeterministic) {
  const Matrix x = random_matrix(30, 5, 7);
  const TsneConfig cfg{.perplexity = 8.0, .iterations = 200, .seed = 9};
  const auto a = tsne(x, cfg);
  const auto b = tsne(x, cfg);
  EXPECT_EQ(a.coords, b.coords);
  ASSERT_EQ(a.coords.cols(), 2u);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < 30; ++i) {
    mx += a.coords(i, 0);
    my += a.coords(i, 1);
  }
  EXPECT_NEAR(mx / 30, 0.0, 1e-10);
  EXPECT_NEAR(my / 30, 0.0, 1e-10);
  const auto c = tsne(x, {.perplexity = 8.0, .iterations = 200, .seed = 10});
  EXPECT_NE(a.coords, c.coords);
}

TEST(Tsne, TwoBlobsAreLinearlySeparable) {
  const auto b = make_blobs(2, 20, 21, 1.0, 0.05, 31);
  const auto r = tsne(b.x, {.perplexity = 10.0, .iterations = 500});
  EXPECT_TRUE(perceptron_separates(r.coords, b.labels));
}

TEST(Tsne, RejectsDegenerateInput) {
  EXPECT_THROW(tsne(Matrix(2, 3, 0.0), {.perplexity = 1.0}), DomainError);
  Matrix x = random_matrix(5, 2, 1);
  x(0, 0) = INFINITY;
  EXPECT_THROW(tsne(x, {.perplexity = 2.0}), ValidationError);
}

}  // namespace
}  // namespace attnscope

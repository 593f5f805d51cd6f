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

#include "attnscope/embedding.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "attnscope/error.hpp"
#include "attnscope/rng.hpp"

namespace attnscope {

namespace {

Matrix pairwise_sq_distances(const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix d(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = squared_distance(x.row(i), x.row(j));
  }
  return d;
}

// Unnormalised Student-t kernel and its sum over i != j.
double student_kernel(const Matrix& y, Matrix& num) {
  const std::size_t n = y.rows();
  num = Matrix(n, n, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
      num(i, j) = num(j, i) = v;
      sum += 2.0 * v;
    }
  }
  return sum;
}

}  // namespace

Affinities tsne_affinities(const Matrix& x, double perplexity) {
  const std::size_t n = x.rows();
  if (!(perplexity > 0.0) || perplexity >= static_cast<double>(n)) {
    throw DomainError(fmt::format("perplexity {} must lie in (0, n={})", perplexity, n));
  }
  const Matrix d = pairwise_sq_distances(x);
  const double target = std::log(perplexity);
  Affinities out{Matrix(n, n, 0.0), std::vector<double>(n), std::vector<double>(n)};
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double entropy = 0.0;
    double min_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) min_d = std::min(min_d, d(i, j));
    }
    for (int step = 0; step < 200; ++step) {
      // Shift by the nearest distance so the largest kernel value is 1.
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * (d(i, j) - min_d));
        sum += row[j];
        weighted += row[j] * (d(i, j) - min_d);
      }
      entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
      const double gap = entropy - target;
      if (std::abs(gap) < 1e-10) break;
      if (gap > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    out.beta[i] = beta;
    out.perplexity[i] = std::exp(entropy);
    for (std::size_t j = 0; j < n; ++j) out.p(i, j) = row[j];
  }
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = (out.p(i, j) + out.p(j, i)) / denom;
      out.p(i, j) = out.p(j, i) = v;
    }
    out.p(i, i) = 0.0;
  }
  return out;
}

double tsne_kl(const Matrix& p, const Matrix& y) {
  Matrix num;
  const double sum = student_kernel(y, num);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      kl += p(i, j) * std::log(p(i, j) / (num(i, j) / sum));
    }
  }
  return kl;
}

Matrix tsne_gradient(const Matrix& p, const Matrix& y) {
  const std::size_t n = y.rows(), dims = y.cols();
  Matrix num;
  const double sum = student_kernel(y, num);
  Matrix grad(n, dims, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double mult = 4.0 * (p(i, j) - num(i, j) / sum) * num(i, j);
      for (std::size_t c = 0; c < dims; ++c) grad(i, c) += mult * (y(i, c) - y(j, c));
    }
  }
  return grad;
}

TsneResult tsne(const Matrix& x, const TsneConfig& cfg) {
  const std::size_t n = x.rows();
  if (n < 3) throw DomainError("t-SNE needs at least 3 points");
  if (cfg.iterations < 1) throw DomainError("t-SNE needs at least one iteration");
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw ValidationError("t-SNE input contains non-finite values");
  }
  const Affinities aff = tsne_affinities(x, cfg.perplexity);

  Rng rng(cfg.seed);
  Matrix y(n, 2);
  for (double& v : y.data()) v = cfg.init_sigma * rng.normal();

  TsneResult result;
  result.initial_kl = tsne_kl(aff.p, y);
  result.kl_trace.push_back(result.initial_kl);

  Matrix exaggerated = aff.p;
  for (double& v : exaggerated.data()) v *= cfg.early_exaggeration;

  Matrix velocity(n, 2, 0.0), gains(n, 2, 1.0);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const bool early = it < cfg.exaggeration_iterations;
    const double momentum = it < cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;
    const Matrix grad = tsne_gradient(early ? exaggerated : aff.p, y);
    for (std::size_t k = 0; k < y.data().size(); ++k) {
      double& g = gains.data()[k];
      double& v = velocity.data()[k];
      const double dy = grad.data()[k];
      // Delta-bar-delta gains: grow when the step direction persists.
      g = (dy > 0.0) != (v > 0.0) ? g + 0.2 : g * 0.8;
      if (g < 0.01) g = 0.01;
      v = momentum * v - cfg.learning_rate * g * dy;
      y.data()[k] += v;
    }
    // Recentre every step.
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, c) -= mean;
    }
    if ((it + 1) % 50 == 0) result.kl_trace.push_back(tsne_kl(aff.p, y));
  }
  result.final_kl = tsne_kl(aff.p, y);
  result.coords = std::move(y);
  return result;
}

}  // namespace attnscope

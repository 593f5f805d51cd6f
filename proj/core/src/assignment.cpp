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

#include "attnscope/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "attnscope/error.hpp"

namespace attnscope {

namespace {

// Classic potentials formulation for minimum cost, 1-based internally.
std::vector<std::size_t> min_cost_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of_row(n);
  for (std::size_t j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

double best_total(const Matrix& weights) {
  const std::size_t n = weights.rows();
  if (n == 0) return 0.0;
  double hi = -std::numeric_limits<double>::infinity();
  for (double w : weights.data()) hi = std::max(hi, w);
  Matrix cost(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) cost(r, c) = hi - weights(r, c);
  }
  return assignment_weight(weights, min_cost_assignment(cost));
}

}  // namespace

double assignment_weight(const Matrix& weights, const std::vector<std::size_t>& col_of_row) {
  double acc = 0.0;
  for (std::size_t r = 0; r < col_of_row.size(); ++r) acc += weights(r, col_of_row[r]);
  return acc;
}

std::vector<std::size_t> max_weight_assignment(const Matrix& weights, double tie_tolerance) {
  const std::size_t n = weights.rows();
  if (weights.cols() != n) throw ShapeError("assignment needs a square weight matrix");
  for (double w : weights.data()) {
    if (!std::isfinite(w)) throw ValidationError("assignment weights must be finite");
  }
  const double optimum = best_total(weights);

  // Fix rows in order, each to the smallest column that still admits an
  // optimal completion.
  std::vector<std::size_t> result(n);
  std::vector<std::size_t> free_rows(n), free_cols(n);
  for (std::size_t i = 0; i < n; ++i) free_rows[i] = free_cols[i] = i;
  double fixed = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    free_rows.erase(free_rows.begin());
    bool placed = false;
    for (std::size_t ci = 0; ci < free_cols.size() && !placed; ++ci) {
      const std::size_t c = free_cols[ci];
      std::vector<std::size_t> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(ci));
      Matrix sub(free_rows.size(), rest_cols.size());
      for (std::size_t a = 0; a < free_rows.size(); ++a) {
        for (std::size_t b = 0; b < rest_cols.size(); ++b) sub(a, b) = weights(free_rows[a], rest_cols[b]);
      }
      const double total = fixed + weights(r, c) + best_total(sub);
      if (total >= optimum - tie_tolerance) {
        result[r] = c;
        fixed += weights(r, c);
        free_cols = std::move(rest_cols);
        placed = true;
      }
    }
    // Unreachable for finite weights: some column always completes optimally.
    if (!placed) throw Error("assignment refinement failed");
  }
  return result;
}

}  // namespace attnscope

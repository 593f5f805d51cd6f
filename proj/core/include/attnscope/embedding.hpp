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
#include <vector>

#include "attnscope/matrix.hpp"

namespace attnscope {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  double init_sigma = 1e-4;
  std::uint64_t seed = 42;
};

struct Affinities {
  Matrix p;                               // symmetric joint probabilities, sum 1
  std::vector<double> perplexity;         // achieved per-point perplexity
  std::vector<double> beta;               // 1 / (2 sigma^2) per point
};

// Gaussian conditional affinities with per-point precision found by bisection
// on the Shannon entropy, then symmetrised: P = (P_cond + P_cond^T) / 2n.
Affinities tsne_affinities(const Matrix& x, double perplexity);

// KL(P || Q) for the Student-t kernel on the embedding y (n x 2).
double tsne_kl(const Matrix& p, const Matrix& y);

// dKL/dy, 4 * sum_j (p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2).
Matrix tsne_gradient(const Matrix& p, const Matrix& y);

struct TsneResult {
  Matrix coords;                  // n x 2, centred
  double initial_kl = 0.0;        // KL at the random start, unexaggerated P
  double final_kl = 0.0;
  std::vector<double> kl_trace;   // every 50 iterations, unexaggerated P
};

// Exact O(n^2) t-SNE.
TsneResult tsne(const Matrix& x, const TsneConfig& cfg = {});

}  // namespace attnscope

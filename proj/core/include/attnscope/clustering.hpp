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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnscope/matrix.hpp"

namespace attnscope {

enum class Algorithm { kKMeans, kGmm };

std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

// The four head behaviour types. The enumerator order is also the order of
// prototype rows in NamingConfig and of palette entries in the renderers.
enum class TypeName { kDense = 0, kDiagonal = 1, kDenseVertical = 2, kVertical = 3 };

inline constexpr std::array<TypeName, 4> kAllTypes = {TypeName::kDense, TypeName::kDiagonal,
                                                      TypeName::kDenseVertical, TypeName::kVertical};

std::string_view type_name_str(TypeName t);  // "dense", "diagonal", "dense_vertical", "vertical"
TypeName parse_type_name(std::string_view name);

struct GmmParams {
  Matrix variances;             // k x D, diagonal covariances
  std::vector<double> weights;  // mixing weights, sum to 1
};

struct ClusterModel {
  Algorithm algorithm = Algorithm::kKMeans;
  std::size_t k = 0;
  Matrix centroids;  // k x D; GMM component means
  std::optional<GmmParams> gmm;
  std::vector<std::size_t> labels;
  // Inertia for k-means, total log-likelihood for GMM.
  double objective = 0.0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  // k-means: inertia after every assignment step of the winning restart.
  // GMM: log-likelihood after every E-step.
  std::vector<double> trace;
};

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  double tolerance = 1e-8;  // max centroid displacement
};

// k-means++ seeding followed by Lloyd iterations; best inertia over restarts
// (ties keep the earliest restart). Restart r draws from Rng::derive(seed, r).
// Equidistant points go to the lowest centroid index.
ClusterModel kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

struct GmmOptions {
  std::size_t max_iterations = 200;
  double tolerance = 1e-7;  // minimum log-likelihood gain
  double variance_floor = 1e-6;
  KMeansOptions init;
};

// Diagonal-covariance EM started from kmeans(x, k, seed).
ClusterModel gmm_em(const Matrix& x, std::size_t k, std::uint64_t seed, const GmmOptions& options = {});

std::vector<std::size_t> nearest_centroid(const Matrix& centroids, const Matrix& x);
double inertia(const Matrix& x, const Matrix& centroids, std::span<const std::size_t> labels);
// Nearest centroid for k-means, argmax responsibility for GMM.
std::vector<std::size_t> predict(const ClusterModel& model, const Matrix& x);

// Permutation perm with perm[other_label] = reference_label maximising
// agreement; lexicographically smallest among the maximisers.
std::vector<std::size_t> align_labels(std::span<const std::size_t> reference,
                                      std::span<const std::size_t> other, std::size_t k);
double agreement(std::span<const std::size_t> reference, std::span<const std::size_t> other,
                 std::span<const std::size_t> perm);

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

struct StabilityOptions {
  std::size_t runs = 10;
  double fraction = 0.5;
  KMeansOptions kmeans;
};

struct StabilityReport {
  std::size_t runs = 0;
  std::vector<std::size_t> reference_labels;
  std::vector<std::vector<std::size_t>> aligned_labels;  // runs x n
  std::vector<bool> consistent;
  double stability = 0.0;
};

inline constexpr std::uint64_t kStabilityStreamTag = 0x5354414249545953ULL;

// Resampling stability. The reference is kmeans(x, k, seed). Run r draws
// floor(fraction * n) distinct indices with a partial Fisher-Yates shuffle from
// Rng::derive(seed ^ kStabilityStreamTag, r), sorts them, fits
// kmeans(subset, k, seed), labels every point by nearest centroid and aligns
// to the reference. A point is consistent when every aligned run agrees with
// the reference label.
StabilityReport stability(const Matrix& x, std::size_t k, std::uint64_t seed,
                          const StabilityOptions& options = {});

// Draws the subset used by stability run `run`.
std::vector<std::size_t> stability_subset(std::size_t n, std::size_t count, std::uint64_t seed,
                                          std::size_t run);

struct Signature {
  double special = 0.0;
  double short_range = 0.0;
  double long_range = 0.0;
};

struct NamingConfig {
  // (special, short, long) prototype per TypeName.
  std::array<std::array<double, 3>, 4> prototypes = {{
      {0.10, 0.20, 0.70},  // dense
      {0.20, 0.70, 0.10},  // diagonal
      {0.45, 0.10, 0.45},  // dense & vertical
      {0.85, 0.10, 0.05},  // vertical
  }};
};

// special = sum of the four special buckets; short = self + windows
// [0, ceil(N/4)); long = windows [ceil(N/2), N).
Signature feature_signature(std::span<const double> feature, std::size_t num_windows);

// Bijective naming of a 4-cluster model by Hungarian matching of centroid
// signatures to prototypes under cosine similarity. Result is indexed by
// cluster id.
std::vector<TypeName> name_clusters(const ClusterModel& model, std::size_t num_windows,
                                    const NamingConfig& config = {});
std::vector<TypeName> name_centroids(const Matrix& centroids, std::size_t num_windows,
                                     const NamingConfig& config = {});

}  // namespace attnscope

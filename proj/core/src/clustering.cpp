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

#include "attnscope/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "attnscope/assignment.hpp"
#include "attnscope/error.hpp"
#include "attnscope/rng.hpp"

namespace attnscope {

namespace {

void check_input(const Matrix& x, std::size_t k) {
  if (k == 0) throw DomainError("k must be >= 1");
  if (x.rows() < k) throw DomainError(fmt::format("need at least k={} points, got {}", k, x.rows()));
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw ValidationError("clustering input contains non-finite values");
  }
}

Matrix kmeanspp_seed(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix centers(k, x.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double cum = 0.0;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          cum += d2[i];
          pick = i;
          if (cum > target) break;
        }
      } else {
        pick = rng.below(n);
      }
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), centers.row(c)));
  }
  return centers;
}

struct LloydResult {
  Matrix centroids;
  std::vector<std::size_t> labels;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> trace;
};

LloydResult lloyd(const Matrix& x, Matrix centroids, const KMeansOptions& options) {
  const std::size_t n = x.rows(), d = x.cols(), k = centroids.rows();
  LloydResult out;
  std::vector<std::size_t> labels(n);
  std::vector<double> dist(n);
  Matrix next(k, d);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = squared_distance(x.row(i), centroids.row(c));
        if (dd < best) {
          best = dd;
          arg = c;
        }
      }
      labels[i] = arg;
      dist[i] = best;
      total += best;
    }
    out.trace.push_back(total);
    ++out.iterations;

    std::fill(next.data().begin(), next.data().end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = next.row(labels[i]);
      const auto xi = x.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += xi[j];
      ++counts[labels[i]];
    }
    std::vector<char> taken(n, 0);
    for (std::size_t c = 0; c < k; ++c) {
      auto row = next.row(c);
      if (counts[c] > 0) {
        for (double& v : row) v /= static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point worst served by its centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      taken[far] = 1;
      std::copy(x.row(far).begin(), x.row(far).end(), row.begin());
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      shift = std::max(shift, std::sqrt(squared_distance(next.row(c), centroids.row(c))));
    }
    std::swap(centroids, next);
    if (shift < options.tolerance) break;
  }
  out.labels = nearest_centroid(centroids, x);
  out.inertia = inertia(x, centroids, out.labels);
  out.trace.push_back(out.inertia);
  out.centroids = std::move(centroids);
  return out;
}

double log_sum_exp(std::span<const double> v) {
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

// Per-point log joint densities log(w_c) + log N(x | mu_c, diag(var_c)).
Matrix gmm_log_joint(const Matrix& x, const Matrix& means, const GmmParams& p) {
  const std::size_t n = x.rows(), d = x.cols(), k = means.rows();
  Matrix out(n, k);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  std::vector<double> norm(k);
  for (std::size_t c = 0; c < k; ++c) {
    double acc = std::log(p.weights[c]);
    for (std::size_t j = 0; j < d; ++j) acc -= 0.5 * (log2pi + std::log(p.variances(c, j)));
    norm[c] = acc;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double acc = norm[c];
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x(i, j) - means(c, j);
        acc -= 0.5 * diff * diff / p.variances(c, j);
      }
      out(i, c) = acc;
    }
  }
  return out;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[arg]) arg = i;
  }
  return arg;
}

}  // namespace

std::string_view algorithm_name(Algorithm a) { return a == Algorithm::kGmm ? "gmm" : "kmeans"; }

Algorithm parse_algorithm(std::string_view name) {
  if (name == "kmeans") return Algorithm::kKMeans;
  if (name == "gmm") return Algorithm::kGmm;
  throw DomainError(fmt::format("unknown algorithm '{}'", name));
}

std::string_view type_name_str(TypeName t) {
  switch (t) {
    case TypeName::kDense: return "dense";
    case TypeName::kDiagonal: return "diagonal";
    case TypeName::kDenseVertical: return "dense_vertical";
    case TypeName::kVertical: return "vertical";
  }
  return "dense";
}

TypeName parse_type_name(std::string_view name) {
  for (TypeName t : kAllTypes) {
    if (type_name_str(t) == name) return t;
  }
  throw DomainError(fmt::format("unknown head type '{}'", name));
}

std::vector<std::size_t> nearest_centroid(const Matrix& centroids, const Matrix& x) {
  if (centroids.cols() != x.cols()) throw ShapeError("centroid and data dimensions differ");
  std::vector<std::size_t> labels(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
      const double d = squared_distance(x.row(i), centroids.row(c));
      if (d < best) {
        best = d;
        labels[i] = c;
      }
    }
  }
  return labels;
}

double inertia(const Matrix& x, const Matrix& centroids, std::span<const std::size_t> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) total += squared_distance(x.row(i), centroids.row(labels[i]));
  return total;
}

ClusterModel kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  check_input(x, k);
  const std::size_t restarts = std::max<std::size_t>(options.restarts, 1);
  std::optional<LloydResult> best;
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng = Rng::derive(seed, r);
    LloydResult run = lloyd(x, kmeanspp_seed(x, k, rng), options);
    if (!best || run.inertia < best->inertia) best = std::move(run);
  }
  ClusterModel m;
  m.algorithm = Algorithm::kKMeans;
  m.k = k;
  m.centroids = std::move(best->centroids);
  m.labels = std::move(best->labels);
  m.objective = best->inertia;
  m.seed = seed;
  m.iterations = best->iterations;
  m.trace = std::move(best->trace);
  return m;
}

ClusterModel gmm_em(const Matrix& x, std::size_t k, std::uint64_t seed, const GmmOptions& options) {
  check_input(x, k);
  const std::size_t n = x.rows(), d = x.cols();
  const ClusterModel init = kmeans(x, k, seed, options.init);

  Matrix means = init.centroids;
  GmmParams p{Matrix(k, d, 0.0), std::vector<double>(k, 0.0)};
  {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = init.labels[i];
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x(i, j) - means(c, j);
        p.variances(c, j) += diff * diff;
      }
    }
    double wsum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double cnt = static_cast<double>(std::max<std::size_t>(counts[c], 1));
      for (std::size_t j = 0; j < d; ++j) {
        p.variances(c, j) = std::max(p.variances(c, j) / cnt, options.variance_floor);
      }
      p.weights[c] = cnt;
      wsum += cnt;
    }
    for (double& w : p.weights) w /= wsum;
  }

  std::vector<double> trace;
  Matrix resp;
  std::size_t iterations = 0;
  for (;;) {
    Matrix lj = gmm_log_joint(x, means, p);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto row = lj.row(i);
      const double lse = log_sum_exp(row);
      ll += lse;
      for (double& v : row) v = std::exp(v - lse);
    }
    resp = std::move(lj);
    const bool converged = !trace.empty() && ll - trace.back() < options.tolerance;
    trace.push_back(ll);
    if (converged || iterations >= options.max_iterations) break;

    ++iterations;
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp(i, c);
      // A starved component keeps its previous parameters.
      if (nk < 1e-12) continue;
      p.weights[c] = nk / static_cast<double>(n);
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += resp(i, c) * x(i, j);
        means(c, j) = acc / nk;
      }
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double diff = x(i, j) - means(c, j);
          acc += resp(i, c) * diff * diff;
        }
        p.variances(c, j) = std::max(acc / nk, options.variance_floor);
      }
    }
    double wsum = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
    for (double& w : p.weights) w /= wsum;
  }

  ClusterModel m;
  m.algorithm = Algorithm::kGmm;
  m.k = k;
  m.centroids = std::move(means);
  m.gmm = std::move(p);
  m.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.labels[i] = argmax(resp.row(i));
  m.objective = trace.back();
  m.seed = seed;
  m.iterations = iterations;
  m.trace = std::move(trace);
  return m;
}

std::vector<std::size_t> predict(const ClusterModel& model, const Matrix& x) {
  if (model.algorithm == Algorithm::kKMeans || !model.gmm) return nearest_centroid(model.centroids, x);
  if (model.centroids.cols() != x.cols()) throw ShapeError("model and data dimensions differ");
  const Matrix lj = gmm_log_joint(x, model.centroids, *model.gmm);
  std::vector<std::size_t> labels(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) labels[i] = argmax(lj.row(i));
  return labels;
}

std::vector<std::size_t> align_labels(std::span<const std::size_t> reference,
                                      std::span<const std::size_t> other, std::size_t k) {
  if (reference.size() != other.size()) throw ShapeError("labelings differ in length");
  Matrix contingency(k, k, 0.0);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (reference[i] >= k || other[i] >= k) {
      throw DomainError(fmt::format("label out of range [0, {}) at index {}", k, i));
    }
    contingency(other[i], reference[i]) += 1.0;
  }
  return max_weight_assignment(contingency, 0.5);
}

double agreement(std::span<const std::size_t> reference, std::span<const std::size_t> other,
                 std::span<const std::size_t> perm) {
  if (reference.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) hits += reference[i] == perm[other[i]];
  return static_cast<double>(hits) / static_cast<double>(reference.size());
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw ShapeError("labelings differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  const std::size_t ka = *std::max_element(a.begin(), a.end()) + 1;
  const std::size_t kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<double> table(ka * kb, 0.0), rows(ka, 0.0), cols(kb, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    table[a[i] * kb + b[i]] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (double v : table) index += pairs(v);
  for (double v : rows) sum_rows += pairs(v);
  for (double v : cols) sum_cols += pairs(v);
  const double expected = sum_rows * sum_cols / pairs(static_cast<double>(n));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  // Both partitions trivial (all singletons or one block): identical structure.
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<std::size_t> stability_subset(std::size_t n, std::size_t count, std::uint64_t seed,
                                          std::size_t run) {
  Rng rng = Rng::derive(seed ^ kStabilityStreamTag, run);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

StabilityReport stability(const Matrix& x, std::size_t k, std::uint64_t seed,
                          const StabilityOptions& options) {
  check_input(x, k);
  if (!(options.fraction > 0.0 && options.fraction <= 1.0)) {
    throw DomainError("fraction must lie in (0, 1]");
  }
  const std::size_t n = x.rows();
  const auto count = static_cast<std::size_t>(std::floor(options.fraction * static_cast<double>(n)));
  if (count < k) throw DomainError(fmt::format("subset of {} points cannot hold k={} clusters", count, k));

  StabilityReport report;
  report.runs = options.runs;
  report.reference_labels = kmeans(x, k, seed, options.kmeans).labels;
  report.consistent.assign(n, true);
  for (std::size_t r = 0; r < options.runs; ++r) {
    const auto idx = stability_subset(n, count, seed, r);
    Matrix sub(count, x.cols());
    for (std::size_t i = 0; i < count; ++i) std::copy(x.row(idx[i]).begin(), x.row(idx[i]).end(), sub.row(i).begin());
    const ClusterModel fit = kmeans(sub, k, seed, options.kmeans);
    const auto labels = nearest_centroid(fit.centroids, x);
    const auto perm = align_labels(report.reference_labels, labels, k);
    std::vector<std::size_t> aligned(n);
    for (std::size_t i = 0; i < n; ++i) {
      aligned[i] = perm[labels[i]];
      if (aligned[i] != report.reference_labels[i]) report.consistent[i] = false;
    }
    report.aligned_labels.push_back(std::move(aligned));
  }
  const auto stable = std::count(report.consistent.begin(), report.consistent.end(), true);
  report.stability = static_cast<double>(stable) / static_cast<double>(n);
  return report;
}

Signature feature_signature(std::span<const double> feature, std::size_t num_windows) {
  if (feature.size() != 5 + num_windows) {
    throw ShapeError(fmt::format("feature has {} components, expected {}", feature.size(), 5 + num_windows));
  }
  Signature sig;
  for (std::size_t k = 1; k < 5; ++k) sig.special += feature[k];
  const std::size_t short_end = (num_windows + 3) / 4;
  const std::size_t long_begin = (num_windows + 1) / 2;
  sig.short_range = feature[0];
  for (std::size_t i = 0; i < short_end; ++i) sig.short_range += feature[5 + i];
  for (std::size_t i = long_begin; i < num_windows; ++i) sig.long_range += feature[5 + i];
  return sig;
}

std::vector<TypeName> name_centroids(const Matrix& centroids, std::size_t num_windows,
                                     const NamingConfig& config) {
  if (centroids.rows() != 4) {
    throw DomainError(fmt::format("naming needs exactly 4 clusters, got {}", centroids.rows()));
  }
  Matrix similarity(4, 4);
  for (std::size_t c = 0; c < 4; ++c) {
    const Signature s = feature_signature(centroids.row(c), num_windows);
    const std::array<double, 3> v = {s.special, s.short_range, s.long_range};
    const double nv = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    for (std::size_t t = 0; t < 4; ++t) {
      const auto& p = config.prototypes[t];
      const double np = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
      const double dot = v[0] * p[0] + v[1] * p[1] + v[2] * p[2];
      similarity(c, t) = (nv > 0.0 && np > 0.0) ? dot / (nv * np) : 0.0;
    }
  }
  const auto match = max_weight_assignment(similarity, 1e-12);
  std::vector<TypeName> names(4);
  for (std::size_t c = 0; c < 4; ++c) names[c] = kAllTypes[match[c]];
  return names;
}

std::vector<TypeName> name_clusters(const ClusterModel& model, std::size_t num_windows,
                                    const NamingConfig& config) {
  if (model.k != 4) throw DomainError(fmt::format("naming needs k = 4, got {}", model.k));
  return name_centroids(model.centroids, num_windows, config);
}

}  // namespace attnscope

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
#include <string>
#include <string_view>
#include <vector>

#include "attnscope/ablation.hpp"
#include "attnscope/matrix.hpp"
#include "attnscope/tensor_io.hpp"

namespace attnscope {

struct RenderConfig {
  std::size_t width = 480;
  std::size_t height = 480;
  // "blues" (white to navy), "gray" (white to black), "viridis".
  std::string colormap = "blues";
  // Indexed by cluster label, or by TypeName for typed figures.
  std::array<std::string, 4> cluster_palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
  std::size_t font_size = 12;
  // Heatmap colour scale: value / row max instead of the absolute value.
  bool row_normalize = false;
  // Which bundle sample the grid renders.
  std::size_t grid_sample = 0;
};

// "#rrggbb" for v clamped to [0, 1]; throws DomainError for an unknown map.
std::string colormap_color(std::string_view name, double v);

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// Linear-interpolation quantile on sorted data: position q * (n - 1).
double quantile_sorted(const std::vector<double>& sorted, double q);
BoxStats box_stats(std::vector<double> values);

std::string render_heatmap(const Matrix& m, const RenderConfig& cfg = {});

// features[c] holds the feature vectors of cluster c; one panel per cluster.
std::string render_boxplot(const std::vector<std::vector<std::vector<double>>>& features,
                           const RenderConfig& cfg = {});

std::string render_scatter(const Matrix& coords, const std::vector<std::size_t>& labels,
                           const RenderConfig& cfg = {});

// Stacked per-layer head counts, coloured by type.
std::string render_layer_distribution(const HeadTyping& typing, const RenderConfig& cfg = {});

// One heatmap tile per head of sample cfg.grid_sample, layer-major, framed in
// the colour of the head's type.
std::string render_grid(const AttentionBundle& bundle, const HeadTyping& typing,
                        const RenderConfig& cfg = {});

// Copy of one head's matrix from a sample.
Matrix head_matrix(const AttentionSample& sample, std::size_t layer, std::size_t head);

}  // namespace attnscope

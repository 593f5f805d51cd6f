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

#include "attnscope/report.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "attnscope/error.hpp"

namespace attnscope {

namespace {

struct Rgb {
  double r, g, b;
};

const std::vector<Rgb>& colormap_stops(std::string_view name) {
  static const std::vector<Rgb> blues = {{247, 251, 255}, {107, 174, 214}, {8, 48, 107}};
  static const std::vector<Rgb> gray = {{255, 255, 255}, {0, 0, 0}};
  static const std::vector<Rgb> viridis = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  if (name == "blues") return blues;
  if (name == "gray") return gray;
  if (name == "viridis") return viridis;
  throw DomainError(fmt::format("unknown colormap '{}'", name));
}

std::string num(double v) { return fmt::format("{:.2f}", v); }

std::string svg_open(double w, double h) {
  return fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
      num(w), num(h));
}

constexpr std::string_view kSvgClose = "</svg>\n";

std::string text(double x, double y, std::size_t size, std::string_view body) {
  std::string escaped;
  for (char c : body) {
    switch (c) {
      case '<': escaped += "&lt;"; break;
      case '>': escaped += "&gt;"; break;
      case '&': escaped += "&amp;"; break;
      default: escaped += c;
    }
  }
  return fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"{}\" font-family=\"sans-serif\">{}</text>\n",
                     num(x), num(y), size, escaped);
}

void check_matrix(const Matrix& m) {
  if (m.empty()) throw DomainError("cannot render an empty matrix");
  for (double v : m.data()) {
    if (!std::isfinite(v)) throw DomainError("cannot render non-finite values");
  }
}

// Cells of one heatmap placed at (x0, y0) with square cells of size `cell`.
void heatmap_cells(std::string& out, const Matrix& m, const RenderConfig& cfg, double x0, double y0,
                   double cell) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double row_max = 0.0;
    if (cfg.row_normalize) {
      for (double v : m.row(r)) row_max = std::max(row_max, v);
    }
    for (std::size_t c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      if (cfg.row_normalize) v = row_max > 0.0 ? v / row_max : 0.0;
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                         num(x0 + static_cast<double>(c) * cell), num(y0 + static_cast<double>(r) * cell),
                         num(cell), num(cell), colormap_color(cfg.colormap, v));
    }
  }
}

}  // namespace

std::string colormap_color(std::string_view name, double v) {
  const auto& stops = colormap_stops(name);
  if (!(v > 0.0)) v = 0.0;
  if (v > 1.0) v = 1.0;
  const double pos = v * static_cast<double>(stops.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(pos), stops.size() - 2);
  const double t = pos - static_cast<double>(i);
  const Rgb& a = stops[i];
  const Rgb& b = stops[i + 1];
  auto channel = [t](double x, double y) { return static_cast<int>(std::lround(x + (y - x) * t)); };
  return fmt::format("#{:02x}{:02x}{:02x}", channel(a.r, b.r), channel(a.g, b.g), channel(a.b, b.b));
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw DomainError("quantile of an empty set");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw DomainError("box statistics of an empty set");
  std::sort(values.begin(), values.end());
  return {values.front(), quantile_sorted(values, 0.25), quantile_sorted(values, 0.5),
          quantile_sorted(values, 0.75), values.back()};
}

Matrix head_matrix(const AttentionSample& sample, std::size_t layer, std::size_t head) {
  if (layer >= sample.num_layers || head >= sample.num_heads) {
    throw DomainError(fmt::format("head ({}, {}) outside {}x{}", layer, head, sample.num_layers, sample.num_heads));
  }
  const std::size_t len = sample.length();
  Matrix m(len, len);
  const auto w = sample.head(layer, head);
  std::copy(w.begin(), w.end(), m.data().begin());
  return m;
}

std::string render_heatmap(const Matrix& m, const RenderConfig& cfg) {
  check_matrix(m);
  const double w = static_cast<double>(cfg.width);
  const double cell = std::min(w / static_cast<double>(m.cols()), static_cast<double>(cfg.height) / static_cast<double>(m.rows()));
  std::string out = svg_open(cell * static_cast<double>(m.cols()), cell * static_cast<double>(m.rows()));
  heatmap_cells(out, m, cfg, 0.0, 0.0, cell);
  out += kSvgClose;
  return out;
}

std::string render_boxplot(const std::vector<std::vector<std::vector<double>>>& features,
                           const RenderConfig& cfg) {
  if (features.empty()) throw DomainError("boxplot needs at least one cluster");
  std::size_t dim = 0;
  double top = 0.0;
  for (std::size_t c = 0; c < features.size(); ++c) {
    if (features[c].empty()) throw DomainError(fmt::format("cluster {} is empty", c));
    for (const auto& v : features[c]) {
      if (dim == 0) dim = v.size();
      if (v.size() != dim || dim == 0) throw ShapeError("feature vectors differ in length");
      for (double x : v) {
        if (!std::isfinite(x)) throw DomainError("cannot render non-finite values");
        top = std::max(top, x);
      }
    }
  }
  if (top <= 0.0) top = 1.0;

  const double w = static_cast<double>(cfg.width), h = static_cast<double>(cfg.height);
  const double panel_h = h / static_cast<double>(features.size());
  const double margin = static_cast<double>(cfg.font_size) + 4.0;
  const double slot = w / static_cast<double>(dim);
  std::string out = svg_open(w, h);
  for (std::size_t c = 0; c < features.size(); ++c) {
    const double y0 = static_cast<double>(c) * panel_h;
    const double plot_h = panel_h - 2.0 * margin;
    auto y_of = [&](double v) { return y0 + margin + plot_h * (1.0 - v / top); };
    const std::string& color = cfg.cluster_palette[c % cfg.cluster_palette.size()];
    out += text(2.0, y0 + static_cast<double>(cfg.font_size), cfg.font_size,
                fmt::format("cluster {} (n={})", c, features[c].size()));
    for (std::size_t j = 0; j < dim; ++j) {
      std::vector<double> column;
      column.reserve(features[c].size());
      for (const auto& v : features[c]) column.push_back(v[j]);
      const BoxStats s = box_stats(std::move(column));
      const double xc = (static_cast<double>(j) + 0.5) * slot;
      const double bw = slot * 0.6;
      out += fmt::format("<g class=\"box\" data-cluster=\"{}\" data-dim=\"{}\">\n", c, j);
      out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333333\"/>\n", num(xc),
                         num(y_of(s.max)), num(y_of(s.min)));
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#333333\"/>\n",
                         num(xc - bw / 2.0), num(y_of(s.q3)), num(bw), num(y_of(s.q1) - y_of(s.q3)), color);
      out += fmt::format("<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#000000\"/>\n",
                         num(xc - bw / 2.0), num(xc + bw / 2.0), num(y_of(s.median)));
      out += "</g>\n";
    }
  }
  out += kSvgClose;
  return out;
}

std::string render_scatter(const Matrix& coords, const std::vector<std::size_t>& labels,
                           const RenderConfig& cfg) {
  if (coords.cols() != 2 || coords.rows() != labels.size()) {
    throw ShapeError("scatter needs n x 2 coordinates and n labels");
  }
  check_matrix(coords);
  double lo_x = coords(0, 0), hi_x = lo_x, lo_y = coords(0, 1), hi_y = lo_y;
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    lo_x = std::min(lo_x, coords(i, 0));
    hi_x = std::max(hi_x, coords(i, 0));
    lo_y = std::min(lo_y, coords(i, 1));
    hi_y = std::max(hi_y, coords(i, 1));
  }
  const double w = static_cast<double>(cfg.width), h = static_cast<double>(cfg.height);
  const double margin = 12.0;
  const double span_x = hi_x > lo_x ? hi_x - lo_x : 1.0;
  const double span_y = hi_y > lo_y ? hi_y - lo_y : 1.0;
  std::string out = svg_open(w, h);
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    const double x = margin + (w - 2.0 * margin) * (coords(i, 0) - lo_x) / span_x;
    const double y = h - margin - (h - 2.0 * margin) * (coords(i, 1) - lo_y) / span_y;
    out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\" data-label=\"{}\"/>\n", num(x), num(y),
                       cfg.cluster_palette[labels[i] % cfg.cluster_palette.size()], labels[i]);
  }
  out += kSvgClose;
  return out;
}

std::string render_layer_distribution(const HeadTyping& typing, const RenderConfig& cfg) {
  if (typing.num_layers == 0 || typing.num_heads == 0) throw DomainError("empty head typing");
  const double w = static_cast<double>(cfg.width), h = static_cast<double>(cfg.height);
  const double margin = static_cast<double>(cfg.font_size) + 4.0;
  const double bar_w = w / static_cast<double>(typing.num_layers);
  const double unit = (h - 2.0 * margin) / static_cast<double>(typing.num_heads);
  std::string out = svg_open(w, h);
  for (std::size_t l = 0; l < typing.num_layers; ++l) {
    std::array<std::size_t, 4> counts{};
    for (std::size_t hd = 0; hd < typing.num_heads; ++hd) {
      const auto it = typing.types.find({l, hd});
      if (it == typing.types.end()) throw ShapeError(fmt::format("typing misses layer {} head {}", l, hd));
      ++counts[static_cast<std::size_t>(it->second)];
    }
    double y = h - margin;
    for (TypeName t : kAllTypes) {
      const std::size_t n = counts[static_cast<std::size_t>(t)];
      if (n == 0) continue;
      const double bh = unit * static_cast<double>(n);
      y -= bh;
      out += fmt::format(
          "<rect class=\"bar\" data-layer=\"{}\" data-type=\"{}\" data-count=\"{}\" x=\"{}\" y=\"{}\" "
          "width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
          l, type_name_str(t), n, num(static_cast<double>(l) * bar_w + 1.0), num(y), num(bar_w - 2.0), num(bh),
          cfg.cluster_palette[static_cast<std::size_t>(t)]);
    }
  }
  double x = 2.0;
  for (TypeName t : kAllTypes) {
    out += text(x, static_cast<double>(cfg.font_size), cfg.font_size, type_name_str(t));
    x += w / 4.0;
  }
  out += kSvgClose;
  return out;
}

std::string render_grid(const AttentionBundle& bundle, const HeadTyping& typing, const RenderConfig& cfg) {
  if (typing.num_layers != bundle.num_layers || typing.num_heads != bundle.num_heads) {
    throw ShapeError("head typing does not match the bundle");
  }
  if (cfg.grid_sample >= bundle.samples.size()) {
    throw DomainError(fmt::format("bundle has no sample {}", cfg.grid_sample));
  }
  const AttentionSample& sample = bundle.samples[cfg.grid_sample];
  const double tile = std::min(static_cast<double>(cfg.width) / static_cast<double>(bundle.num_heads),
                               static_cast<double>(cfg.height) / static_cast<double>(bundle.num_layers));
  const double pad = 2.0;
  const double cell = (tile - 2.0 * pad) / static_cast<double>(sample.length());
  std::string out = svg_open(tile * static_cast<double>(bundle.num_heads), tile * static_cast<double>(bundle.num_layers));
  for (std::size_t l = 0; l < bundle.num_layers; ++l) {
    for (std::size_t hd = 0; hd < bundle.num_heads; ++hd) {
      const auto it = typing.types.find({l, hd});
      if (it == typing.types.end()) throw ShapeError(fmt::format("typing misses layer {} head {}", l, hd));
      const double x0 = static_cast<double>(hd) * tile, y0 = static_cast<double>(l) * tile;
      out += fmt::format("<g class=\"tile\" data-layer=\"{}\" data-head=\"{}\" data-type=\"{}\">\n", l, hd,
                         type_name_str(it->second));
      const Matrix m = head_matrix(sample, l, hd);
      check_matrix(m);
      heatmap_cells(out, m, cfg, x0 + pad, y0 + pad, cell);
      out += fmt::format(
          "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
          num(x0 + pad / 2.0), num(y0 + pad / 2.0), num(tile - pad), num(tile - pad),
          cfg.cluster_palette[static_cast<std::size_t>(it->second)], num(pad));
      out += "</g>\n";
    }
  }
  out += kSvgClose;
  return out;
}

}  // namespace attnscope

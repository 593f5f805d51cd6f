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

#include "attnscope/table_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "attnscope/error.hpp"
#include "json.hpp"

namespace attnscope {

namespace {

using nlohmann::json;

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto l : split(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

double parse_double(std::string_view s) {
  const std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) throw FormatError(fmt::format("bad number '{}'", s));
  return v;
}

std::size_t parse_index(std::string_view s) {
  const std::string tmp(s);
  char* end = nullptr;
  const unsigned long long v = std::strtoull(tmp.c_str(), &end, 10);
  if (tmp.empty() || tmp[0] == '-' || end != tmp.c_str() + tmp.size()) {
    throw FormatError(fmt::format("bad index '{}'", s));
  }
  return static_cast<std::size_t>(v);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t& pos) {
  if (b.size() - pos < 4) throw FormatError("feature table truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

constexpr std::string_view kTableMagic = "ATNF0001";

}  // namespace

FeatureTable make_feature_table(const Matrix& features, std::size_t num_heads, const FeatureConfig& cfg) {
  if (features.cols() != cfg.dimension()) throw ShapeError("feature matrix width does not match config");
  if (num_heads == 0 || features.rows() % num_heads != 0) throw ShapeError("rows are not a whole number of layers");
  FeatureTable t;
  t.columns = feature_column_names(cfg);
  t.values = features;
  for (std::size_t r = 0; r < features.rows(); ++r) t.heads.push_back({r / num_heads, r % num_heads});
  return t;
}

std::string feature_table_to_csv(const FeatureTable& table) {
  std::string out = "layer,head";
  for (const auto& c : table.columns) out += "," + c;
  out += "\n";
  for (std::size_t r = 0; r < table.values.rows(); ++r) {
    out += fmt::format("{},{}", table.heads[r].layer, table.heads[r].head);
    for (double v : table.values.row(r)) out += fmt::format(",{}", v);
    out += "\n";
  }
  return out;
}

FeatureTable feature_table_from_csv(std::string_view text) {
  const auto rows = lines(text);
  if (rows.empty()) throw FormatError("empty feature CSV");
  const auto header = split(rows[0], ',');
  if (header.size() < 3 + kFirstWindowColumn || header[0] != "layer" || header[1] != "head") {
    throw FormatError("feature CSV header must start with layer,head and hold at least one window");
  }
  FeatureTable t;
  for (std::size_t c = 2; c < header.size(); ++c) t.columns.emplace_back(header[c]);
  const std::size_t cols = t.columns.size();
  t.values = Matrix(rows.size() - 1, cols);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto fields = split(rows[r], ',');
    if (fields.size() != cols + 2) throw FormatError(fmt::format("feature CSV line {} has {} fields", r + 1, fields.size()));
    t.heads.push_back({parse_index(fields[0]), parse_index(fields[1])});
    for (std::size_t c = 0; c < cols; ++c) t.values(r - 1, c) = parse_double(fields[c + 2]);
  }
  return t;
}

std::vector<std::uint8_t> encode_feature_table(const FeatureTable& table) {
  std::vector<std::uint8_t> out(kTableMagic.begin(), kTableMagic.end());
  put_u32(out, static_cast<std::uint32_t>(table.values.rows()));
  put_u32(out, static_cast<std::uint32_t>(table.values.cols()));
  for (std::size_t r = 0; r < table.values.rows(); ++r) {
    put_u32(out, static_cast<std::uint32_t>(table.heads[r].layer));
    put_u32(out, static_cast<std::uint32_t>(table.heads[r].head));
    for (double v : table.values.row(r)) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

FeatureTable decode_feature_table(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kTableMagic.size() ||
      !std::equal(kTableMagic.begin(), kTableMagic.end(), bytes.begin())) {
    throw FormatError("feature table: bad magic");
  }
  std::size_t pos = kTableMagic.size();
  const std::size_t rows = get_u32(bytes, pos);
  const std::size_t cols = get_u32(bytes, pos);
  if (cols < kFirstWindowColumn + 1) throw FormatError("feature table too narrow");
  FeatureTable t;
  t.columns = feature_column_names({cols - kFirstWindowColumn});
  t.values = Matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t layer = get_u32(bytes, pos);
    const std::size_t head = get_u32(bytes, pos);
    t.heads.push_back({layer, head});
    for (std::size_t c = 0; c < cols; ++c) t.values(r, c) = std::bit_cast<float>(get_u32(bytes, pos));
  }
  if (pos != bytes.size()) throw FormatError("feature table: trailing bytes");
  return t;
}

std::string assignments_to_csv(const std::vector<AssignmentRow>& rows) {
  std::string out = "layer,head,cluster,type_name\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{}\n", r.head.layer, r.head.head, r.cluster,
                       r.type ? type_name_str(*r.type) : std::string_view{});
  }
  return out;
}

std::vector<AssignmentRow> assignments_from_csv(std::string_view text) {
  const auto rows = lines(text);
  if (rows.empty() || rows[0] != "layer,head,cluster,type_name") {
    throw FormatError("assignment CSV header must be layer,head,cluster,type_name");
  }
  std::vector<AssignmentRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto f = split(rows[r], ',');
    if (f.size() != 4) throw FormatError(fmt::format("assignment CSV line {} has {} fields", r + 1, f.size()));
    AssignmentRow row{{parse_index(f[0]), parse_index(f[1])}, parse_index(f[2]), std::nullopt};
    if (!f[3].empty()) row.type = parse_type_name(f[3]);
    out.push_back(row);
  }
  return out;
}

HeadTyping typing_from_assignments(const std::vector<AssignmentRow>& rows) {
  HeadTyping typing;
  for (const auto& r : rows) {
    if (!r.type) throw FormatError(fmt::format("layer {} head {} has no type name", r.head.layer, r.head.head));
    if (!typing.types.emplace(r.head, *r.type).second) {
      throw FormatError(fmt::format("layer {} head {} listed twice", r.head.layer, r.head.head));
    }
    typing.num_layers = std::max(typing.num_layers, r.head.layer + 1);
    typing.num_heads = std::max(typing.num_heads, r.head.head + 1);
  }
  if (typing.types.size() != typing.num_layers * typing.num_heads) {
    throw FormatError("assignments do not cover a full layers x heads grid");
  }
  return typing;
}

std::string coords_to_csv(const std::vector<HeadId>& heads, const Matrix& coords,
                          const std::vector<std::size_t>& clusters) {
  if (coords.rows() != heads.size() || clusters.size() != heads.size() || coords.cols() != 2) {
    throw ShapeError("coordinates, heads and clusters disagree in length");
  }
  std::string out = "layer,head,x,y,cluster\n";
  for (std::size_t i = 0; i < heads.size(); ++i) {
    out += fmt::format("{},{},{},{},{}\n", heads[i].layer, heads[i].head, coords(i, 0), coords(i, 1), clusters[i]);
  }
  return out;
}

CoordsTable coords_from_csv(std::string_view text) {
  const auto rows = lines(text);
  if (rows.empty() || rows[0] != "layer,head,x,y,cluster") {
    throw FormatError("coordinate CSV header must be layer,head,x,y,cluster");
  }
  CoordsTable t;
  t.coords = Matrix(rows.size() - 1, 2);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto f = split(rows[r], ',');
    if (f.size() != 5) throw FormatError(fmt::format("coordinate CSV line {} has {} fields", r + 1, f.size()));
    t.heads.push_back({parse_index(f[0]), parse_index(f[1])});
    t.coords(r - 1, 0) = parse_double(f[2]);
    t.coords(r - 1, 1) = parse_double(f[3]);
    t.clusters.push_back(parse_index(f[4]));
  }
  return t;
}

std::string cluster_model_to_json(const ClusterModel& model, std::size_t num_windows,
                                  const std::vector<HeadId>& heads) {
  auto rows = [](const Matrix& m) {
    json a = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) a.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return a;
  };
  json j;
  j["format"] = "attnscope-model-v1";
  j["algorithm"] = std::string(algorithm_name(model.algorithm));
  j["k"] = model.k;
  j["seed"] = model.seed;
  j["num_windows"] = num_windows;
  j["objective"] = model.objective;
  j["iterations"] = model.iterations;
  j["centroids"] = rows(model.centroids);
  if (model.gmm) {
    j["variances"] = rows(model.gmm->variances);
    j["weights"] = model.gmm->weights;
  }
  j["labels"] = model.labels;
  json h = json::array();
  for (const auto& id : heads) h.push_back({id.layer, id.head});
  j["heads"] = h;
  return j.dump(2) + "\n";
}

StoredModel cluster_model_from_json(std::string_view text) {
  StoredModel out;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "attnscope-model-v1") throw FormatError("not a cluster model file");
    auto matrix = [](const json& a) {
      const auto v = a.get<std::vector<std::vector<double>>>();
      Matrix m(v.size(), v.empty() ? 0 : v[0].size());
      for (std::size_t r = 0; r < v.size(); ++r) {
        if (v[r].size() != m.cols()) throw FormatError("ragged matrix in model file");
        std::copy(v[r].begin(), v[r].end(), m.row(r).begin());
      }
      return m;
    };
    ClusterModel& m = out.model;
    m.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    m.k = j.at("k").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.objective = j.at("objective").get<double>();
    m.iterations = j.at("iterations").get<std::size_t>();
    m.centroids = matrix(j.at("centroids"));
    if (j.contains("variances")) m.gmm = GmmParams{matrix(j.at("variances")), j.at("weights").get<std::vector<double>>()};
    m.labels = j.at("labels").get<std::vector<std::size_t>>();
    out.num_windows = j.at("num_windows").get<std::size_t>();
    for (const auto& h : j.at("heads")) out.heads.push_back({h.at(0).get<std::size_t>(), h.at(1).get<std::size_t>()});
    if (m.centroids.rows() != m.k) throw FormatError("model centroid count differs from k");
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("malformed model file: {}", e.what()));
  }
  return out;
}

std::string stability_report_to_json(const StabilityReport& report, const std::vector<HeadId>& heads,
                                     std::size_t k, double fraction, std::uint64_t seed) {
  json j;
  j["format"] = "attnscope-stability-v1";
  j["k"] = k;
  j["runs"] = report.runs;
  j["fraction"] = fraction;
  j["seed"] = seed;
  j["stability"] = report.stability;
  j["consistent_heads"] = std::count(report.consistent.begin(), report.consistent.end(), true);
  j["num_heads"] = report.consistent.size();
  j["reference_labels"] = report.reference_labels;
  j["aligned_labels"] = report.aligned_labels;
  json unstable = json::array();
  for (std::size_t i = 0; i < report.consistent.size(); ++i) {
    if (!report.consistent[i]) unstable.push_back({heads.at(i).layer, heads.at(i).head});
  }
  j["unstable_heads"] = unstable;
  return j.dump(2) + "\n";
}

}  // namespace attnscope

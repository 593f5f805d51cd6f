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

#include "attnscope/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "attnscope/error.hpp"
#include "json.hpp"

namespace attnscope {

namespace {

using nlohmann::json;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError("sample file truncated");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed: {}", path.string()));
}

std::string sample_file_name(std::size_t index) { return fmt::format("sample-{:05d}.atnb", index); }

}  // namespace

SpecialKind special_kind_of(std::string_view surface) {
  if (surface == "[CLS]") return SpecialKind::kCls;
  if (surface == "[SEP]") return SpecialKind::kSep;
  if (surface == ",") return SpecialKind::kComma;
  if (surface == ".") return SpecialKind::kPeriod;
  return SpecialKind::kNone;
}

std::string_view special_kind_name(SpecialKind kind) {
  switch (kind) {
    case SpecialKind::kCls: return "cls";
    case SpecialKind::kSep: return "sep";
    case SpecialKind::kComma: return "comma";
    case SpecialKind::kPeriod: return "period";
    case SpecialKind::kNone: break;
  }
  return "none";
}

TokenMeta TokenMeta::make(std::string surface, std::int32_t sentence_id) {
  TokenMeta t;
  t.special_kind = special_kind_of(surface);
  t.surface = std::move(surface);
  t.sentence_id = sentence_id;
  return t;
}

ValidationDiagnostics validate_sample(const AttentionSample& sample, double tolerance) {
  ValidationDiagnostics diag;
  const std::size_t len = sample.length();
  if (sample.weights.size() != sample.num_layers * sample.num_heads * len * len) {
    diag.shape_ok = false;
    return diag;
  }
  diag.min_entry = std::numeric_limits<double>::infinity();
  diag.max_entry = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < sample.num_layers; ++l) {
    for (std::size_t h = 0; h < sample.num_heads; ++h) {
      const auto m = sample.head(l, h);
      for (std::size_t s = 0; s < len; ++s) {
        double sum = 0.0;
        for (std::size_t u = 0; u < len; ++u) {
          const double w = m[s * len + u];
          sum += w;
          if (!(w >= 0.0 && w <= 1.0)) ++diag.out_of_range_entries;
          if (w < diag.min_entry) diag.min_entry = w;
          if (w > diag.max_entry) diag.max_entry = w;
        }
        const double dev = std::abs(sum - 1.0);
        const RowDeviation where{l, h, s, dev};
        // A NaN row is the worst possible row and sticks once seen.
        if (!diag.worst_row || dev > diag.max_row_deviation ||
            (std::isnan(dev) && !std::isnan(diag.max_row_deviation))) {
          diag.max_row_deviation = dev;
          diag.worst_row = where;
        }
        if (!(dev <= tolerance)) diag.offending_rows.push_back(where);
      }
    }
  }
  if (len == 0 || sample.num_layers * sample.num_heads == 0) {
    diag.min_entry = 0.0;
    diag.max_entry = 0.0;
  }
  return diag;
}

std::vector<std::uint8_t> encode_sample(const AttentionSample& sample) {
  const std::size_t len = sample.length();
  if (sample.weights.size() != sample.num_layers * sample.num_heads * len * len) {
    throw ShapeError(fmt::format("sample '{}': weight buffer does not match dims", sample.sample_id));
  }
  std::vector<std::uint8_t> out;
  out.reserve(8 + 16 + 4 * sample.weights.size() + 16 * len);
  out.insert(out.end(), kSampleMagic.begin(), kSampleMagic.end());
  put_u32(out, static_cast<std::uint32_t>(sample.num_layers));
  put_u32(out, static_cast<std::uint32_t>(sample.num_heads));
  put_u32(out, static_cast<std::uint32_t>(len));
  put_u32(out, static_cast<std::uint32_t>(len));
  for (double w : sample.weights) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(w)));
  put_u32(out, static_cast<std::uint32_t>(len));
  for (const auto& t : sample.tokens) {
    if (t.surface.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ShapeError("token surface longer than 65535 bytes");
    }
    put_u16(out, static_cast<std::uint16_t>(t.surface.size()));
    out.insert(out.end(), t.surface.begin(), t.surface.end());
    out.push_back(static_cast<std::uint8_t>(t.special_kind));
    put_u32(out, static_cast<std::uint32_t>(t.sentence_id));
  }
  return out;
}

AttentionSample decode_sample(std::span<const std::uint8_t> bytes, std::string sample_id) {
  Reader in(bytes);
  const auto magic = in.take(kSampleMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kSampleMagic.begin())) {
    throw FormatError(fmt::format("sample '{}': bad magic", sample_id));
  }
  AttentionSample s;
  s.sample_id = std::move(sample_id);
  s.num_layers = in.u32();
  s.num_heads = in.u32();
  const std::size_t rows = in.u32();
  const std::size_t cols = in.u32();
  if (rows != cols) {
    throw ShapeError(fmt::format("sample '{}': non-square attention {}x{}", s.sample_id, rows, cols));
  }
  const std::size_t count = s.num_layers * s.num_heads * rows * cols;
  if (count > bytes.size() / 4) throw FormatError(fmt::format("sample '{}': truncated weights", s.sample_id));
  s.weights.resize(count);
  for (auto& w : s.weights) w = static_cast<double>(std::bit_cast<float>(in.u32()));
  const std::size_t num_tokens = in.u32();
  if (num_tokens != rows) {
    throw ShapeError(fmt::format("sample '{}': {} tokens for length {}", s.sample_id, num_tokens, rows));
  }
  s.tokens.reserve(num_tokens);
  for (std::size_t i = 0; i < num_tokens; ++i) {
    const std::size_t n = in.u16();
    const auto raw = in.take(n);
    TokenMeta t;
    t.surface.assign(raw.begin(), raw.end());
    const std::uint8_t kind = in.u8();
    if (kind > static_cast<std::uint8_t>(SpecialKind::kPeriod)) {
      throw FormatError(fmt::format("sample '{}': bad special kind {}", s.sample_id, kind));
    }
    t.special_kind = static_cast<SpecialKind>(kind);
    if (t.special_kind != special_kind_of(t.surface)) {
      throw FormatError(fmt::format("sample '{}': token {} kind disagrees with surface '{}'",
                                    s.sample_id, i, t.surface));
    }
    t.sentence_id = static_cast<std::int32_t>(in.u32());
    if (t.sentence_id < -1) {
      throw FormatError(fmt::format("sample '{}': sentence id {} < -1", s.sample_id, t.sentence_id));
    }
    s.tokens.push_back(std::move(t));
  }
  if (!in.done()) throw FormatError(fmt::format("sample '{}': trailing bytes", s.sample_id));
  return s;
}

AttentionBundle load_bundle(const std::filesystem::path& dir, const LoadOptions& options) {
  const auto manifest_path = dir / kManifestName;
  json manifest;
  {
    std::ifstream in(manifest_path);
    if (!in) throw FormatError(fmt::format("missing manifest {}", manifest_path.string()));
    try {
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw FormatError(fmt::format("corrupt manifest {}: {}", manifest_path.string(), e.what()));
    }
  }
  AttentionBundle b;
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<std::size_t> lengths;
  try {
    if (manifest.at("format").get<std::string>() != kSampleMagic) {
      throw FormatError("manifest format tag is not ATNB0001");
    }
    b.model_name = manifest.at("model_name").get<std::string>();
    b.num_layers = manifest.at("num_layers").get<std::size_t>();
    b.num_heads = manifest.at("num_heads").get<std::size_t>();
    for (const auto& e : manifest.at("samples")) {
      entries.emplace_back(e.at("id").get<std::string>(), e.at("file").get<std::string>());
      lengths.push_back(e.at("length").get<std::size_t>());
    }
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("corrupt manifest {}: {}", manifest_path.string(), e.what()));
  }

  std::set<std::string> seen;
  b.samples.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [id, file] = entries[i];
    if (!seen.insert(id).second) throw FormatError(fmt::format("duplicate sample id '{}'", id));
    const auto bytes = read_file(dir / file);
    AttentionSample s = decode_sample(bytes, id);
    if (s.num_layers != b.num_layers || s.num_heads != b.num_heads || s.length() != lengths[i]) {
      throw ShapeError(fmt::format(
          "sample '{}': tensor is {}x{}x{}x{} but manifest declares {}x{}x{}x{}", id, s.num_layers,
          s.num_heads, s.length(), s.length(), b.num_layers, b.num_heads, lengths[i], lengths[i]));
    }
    if (s.length() < 2) throw ShapeError(fmt::format("sample '{}': length {} < 2", id, s.length()));
    if (options.validate) {
      const auto diag = validate_sample(s, options.tolerance);
      if (!diag.offending_rows.empty()) {
        const auto& r = diag.offending_rows.front();
        throw ValidationError(fmt::format(
            "sample '{}' layer {} head {} row {}: row sum deviates from 1 by {:g}", id, r.layer,
            r.head, r.row, r.deviation));
      }
      if (diag.out_of_range_entries > 0) {
        throw ValidationError(fmt::format("sample '{}': {} entries outside [0, 1]", id,
                                          diag.out_of_range_entries));
      }
    }
    b.samples.push_back(std::move(s));
  }
  return b;
}

void write_bundle(const AttentionBundle& bundle, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  json manifest;
  manifest["format"] = std::string(kSampleMagic);
  manifest["model_name"] = bundle.model_name;
  manifest["num_layers"] = bundle.num_layers;
  manifest["num_heads"] = bundle.num_heads;
  manifest["samples"] = json::array();
  std::set<std::string> seen;
  for (std::size_t i = 0; i < bundle.samples.size(); ++i) {
    const auto& s = bundle.samples[i];
    if (s.num_layers != bundle.num_layers || s.num_heads != bundle.num_heads) {
      throw ShapeError(fmt::format("sample '{}' dims differ from bundle", s.sample_id));
    }
    if (!seen.insert(s.sample_id).second) {
      throw ShapeError(fmt::format("duplicate sample id '{}'", s.sample_id));
    }
    const std::string file = sample_file_name(i);
    write_file(dir / file, encode_sample(s));
    manifest["samples"].push_back({{"id", s.sample_id}, {"file", file}, {"length", s.length()}});
  }
  const std::string text = manifest.dump(2) + "\n";
  write_file(dir / kManifestName,
             {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

AttentionBundle to_storage_precision(AttentionBundle bundle) {
  for (auto& s : bundle.samples) {
    for (auto& w : s.weights) w = static_cast<double>(static_cast<float>(w));
  }
  return bundle;
}

}  // namespace attnscope

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

#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "attnscope/ablation.hpp"
#include "attnscope/clustering.hpp"
#include "attnscope/embedding.hpp"
#include "attnscope/error.hpp"
#include "attnscope/feature.hpp"
#include "attnscope/report.hpp"
#include "attnscope/synth.hpp"
#include "attnscope/table_io.hpp"
#include "attnscope/tensor_io.hpp"
#include "json.hpp"

namespace attnscope::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kVersion = "0.1.0";
constexpr std::uint64_t kDefaultSeed = 42;

// Bad flag values that CLI11 cannot catch on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError(fmt::format("write failed: {}", path.string()));
}

// FNV-1a, 64-bit.
struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(std::string_view bytes) {
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
};

std::string content_hash(const fs::path& path) {
  Fnv1a f;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), path));
    }
    std::sort(files.begin(), files.end());
    for (const auto& rel : files) {
      f.add(rel.generic_string());
      f.add(std::string_view("\0", 1));
      f.add(read_text(path / rel));
    }
  } else {
    f.add(read_text(path));
  }
  return fmt::format("fnv1a64:{:016x}", f.h);
}

struct RunContext {
  std::vector<std::string> args;
  std::vector<fs::path> inputs;

  // Writes <output>.run.json next to each output.
  void record(const std::vector<fs::path>& outputs) const {
    json j;
    j["tool"] = "attnscope";
    j["version"] = std::string(kVersion);
    j["args"] = args;
    j["inputs"] = json::array();
    for (const auto& p : inputs) j["inputs"].push_back({{"path", p.generic_string()}, {"hash", content_hash(p)}});
    j["outputs"] = json::array();
    for (const auto& p : outputs) j["outputs"].push_back({{"path", p.generic_string()}, {"hash", content_hash(p)}});
    const std::string text = j.dump(2) + "\n";
    for (const auto& p : outputs) {
      fs::path side = p;
      if (side.filename().empty()) side = side.parent_path();
      side += ".run.json";
      write_text(side, text);
    }
  }
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("ATTN_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*env != '\0' && *end == '\0') return v;
  }
  return kDefaultSeed;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

TypeName type_flag(const std::string& name) {
  try {
    return parse_type_name(name);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

FeatureTable load_features(const fs::path& path) { return feature_table_from_csv(read_text(path)); }

HeadTyping load_typing(const fs::path& path) { return typing_from_assignments(assignments_from_csv(read_text(path))); }

struct MaskFlags {
  bool renormalize = false;
  bool no_preserve_special = false;
  std::vector<int> protect;

  MaskOptions options() const {
    MaskOptions o;
    o.renormalize_rows = renormalize;
    o.preserve_special_targets = !no_preserve_special;
    o.protected_sentence_ids.insert(protect.begin(), protect.end());
    return o;
  }
};

void add_mask_flags(CLI::App* cmd, MaskFlags& f) {
  cmd->add_flag("--renormalize", f.renormalize, "Rescale each nonzero row of an ablated head to sum 1");
  cmd->add_flag("--no-preserve-special", f.no_preserve_special,
                "Treat entries touching [CLS]/[SEP] (sentence -1) as inter-sentence");
  cmd->add_option("--protect", f.protect, "Sentence ids exempt from scoped ablation")->delimiter(',');
}

struct RenderFlags {
  std::size_t width = 480;
  std::size_t height = 480;
  std::string colormap = "blues";
  bool row_normalize = false;

  RenderConfig config() const {
    RenderConfig c;
    c.width = width;
    c.height = height;
    c.colormap = colormap;
    c.row_normalize = row_normalize;
    return c;
  }
};

void add_render_flags(CLI::App* cmd, RenderFlags& f) {
  cmd->add_option("--width", f.width, "Figure width in pixels")->check(CLI::PositiveNumber);
  cmd->add_option("--height", f.height, "Figure height in pixels")->check(CLI::PositiveNumber);
  cmd->add_option("--colormap", f.colormap, "blues, gray or viridis")
      ->check(CLI::IsMember({"blues", "gray", "viridis"}));
  cmd->add_flag("--row-normalize", f.row_normalize, "Scale heatmap rows by their maximum");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"attnscope: attention head taxonomy, stability and ablation toolkit", "attnscope"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  RunContext ctx{args, {}};
  std::optional<std::uint64_t> seed_flag;
  auto seed = [&] { return seed_flag.value_or(default_seed()); };
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { seed_flag = v; }, "RNG seed (default 42 or $ATTN_SEED)");
  };

  std::function<int()> action;

  // validate
  fs::path bundle_path;
  double tolerance = kIngestRowSumTolerance;
  auto* validate = app.add_subcommand("validate", "Check a bundle's format and row-stochastic weights");
  validate->add_option("bundle", bundle_path, "Bundle directory")->required();
  validate->add_option("--tolerance", tolerance, "Row-sum tolerance");
  validate->callback([&] {
    action = [&] {
      AttentionBundle b;
      try {
        b = load_bundle(bundle_path, {.validate = false});
      } catch (const Error& e) {
        err << "invalid bundle: " << e.what() << "\n";
        return kExitFailure;
      }
      bool ok = true;
      for (const auto& s : b.samples) {
        const auto d = validate_sample(s, tolerance);
        if (d.ok()) {
          out << fmt::format("ok   {} L={} max_row_deviation={:.3g}\n", s.sample_id, s.length(), d.max_row_deviation);
          continue;
        }
        ok = false;
        out << fmt::format("FAIL {} L={} max_row_deviation={:.3g} offending_rows={} out_of_range={}\n", s.sample_id,
                           s.length(), d.max_row_deviation, d.offending_rows.size(), d.out_of_range_entries);
        for (std::size_t i = 0; i < std::min<std::size_t>(d.offending_rows.size(), 5); ++i) {
          const auto& r = d.offending_rows[i];
          out << fmt::format("     layer {} head {} row {} deviation {:.3g}\n", r.layer, r.head, r.row, r.deviation);
        }
      }
      out << fmt::format("{} samples, {}x{} heads: {}\n", b.samples.size(), b.num_layers, b.num_heads,
                         ok ? "valid" : "INVALID");
      return ok ? kExitOk : kExitFailure;
    };
  });

  // features
  fs::path output;
  std::optional<fs::path> binary_output;
  std::size_t num_windows = 16;
  bool exclude_special_sources = false;
  bool no_validate = false;
  auto* features = app.add_subcommand("features", "Extract the distance feature of every head");
  features->add_option("bundle", bundle_path, "Bundle directory")->required();
  features->add_option("-o,--output", output, "Feature CSV")->required();
  features->add_option("-N,--windows", num_windows, "Number of distance windows")->check(CLI::PositiveNumber);
  features->add_option("--binary", binary_output, "Also write the float32 feature table");
  features->add_flag("--exclude-special-sources", exclude_special_sources, "Average over non-special source rows only");
  features->add_flag("--no-validate", no_validate, "Skip row-sum validation (e.g. for ablated bundles)");
  features->callback([&] {
    action = [&] {
      ctx.inputs = {bundle_path};
      const auto bundle = load_bundle(bundle_path, {.validate = !no_validate});
      const FeatureConfig cfg{num_windows, exclude_special_sources};
      const auto table = make_feature_table(feature_matrix(bundle, cfg), bundle.num_heads, cfg);
      write_text(output, feature_table_to_csv(table));
      std::vector<fs::path> outs = {output};
      if (binary_output) {
        const auto bytes = encode_feature_table(table);
        write_text(*binary_output, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
        outs.push_back(*binary_output);
      }
      ctx.record(outs);
      out << fmt::format("wrote {} heads x {} features to {}\n", table.values.rows(), table.values.cols(),
                         output.string());
      return kExitOk;
    };
  });

  // cluster
  fs::path features_path;
  std::size_t k = 4;
  std::string algo = "kmeans";
  std::size_t restarts = 10;
  std::optional<fs::path> model_output;
  auto* cluster = app.add_subcommand("cluster", "Cluster head features");
  cluster->add_option("features", features_path, "Feature CSV")->required();
  cluster->add_option("-k", k, "Number of clusters")->check(CLI::PositiveNumber);
  cluster->add_option("--algo", algo, "kmeans or gmm")->check(CLI::IsMember({"kmeans", "gmm"}));
  cluster->add_option("--restarts", restarts, "k-means restarts")->check(CLI::PositiveNumber);
  cluster->add_option("-o,--output", output, "Assignment CSV (layer,head,cluster,type_name)")->required();
  cluster->add_option("--model", model_output, "Also write the fitted model (JSON)");
  add_seed(cluster);
  cluster->callback([&] {
    action = [&] {
      ctx.inputs = {features_path};
      const auto table = load_features(features_path);
      KMeansOptions km;
      km.restarts = restarts;
      ClusterModel model;
      if (algo == "gmm") {
        GmmOptions g;
        g.init = km;
        model = gmm_em(table.values, k, seed(), g);
      } else {
        model = kmeans(table.values, k, seed(), km);
      }
      std::vector<TypeName> names;
      if (k == 4) names = name_clusters(model, table.num_windows());
      std::vector<AssignmentRow> rows;
      for (std::size_t i = 0; i < table.heads.size(); ++i) {
        AssignmentRow r{table.heads[i], model.labels[i], std::nullopt};
        if (!names.empty()) r.type = names[model.labels[i]];
        rows.push_back(r);
      }
      write_text(output, assignments_to_csv(rows));
      std::vector<fs::path> outs = {output};
      if (model_output) {
        write_text(*model_output, cluster_model_to_json(model, table.num_windows(), table.heads));
        outs.push_back(*model_output);
      }
      ctx.record(outs);
      std::vector<std::size_t> sizes(k, 0);
      for (auto l : model.labels) ++sizes[l];
      for (std::size_t c = 0; c < k; ++c) {
        out << fmt::format("cluster {} {:>15} {:4d} heads\n", c, names.empty() ? "" : type_name_str(names[c]), sizes[c]);
      }
      out << fmt::format("{} objective {:.10g}\n", algorithm_name(model.algorithm), model.objective);
      return kExitOk;
    };
  });

  // stability
  std::size_t runs = 10;
  double fraction = 0.5;
  auto* stab = app.add_subcommand("stability", "Resampling stability of k-means clustering");
  stab->add_option("features", features_path, "Feature CSV")->required();
  stab->add_option("-k", k, "Number of clusters")->check(CLI::PositiveNumber);
  stab->add_option("--runs", runs, "Number of resampled fits")->check(CLI::PositiveNumber);
  stab->add_option("--fraction", fraction, "Subsample fraction")->check(CLI::Range(0.0, 1.0));
  stab->add_option("--restarts", restarts, "k-means restarts")->check(CLI::PositiveNumber);
  stab->add_option("-o,--output", output, "Stability report (JSON)")->required();
  add_seed(stab);
  stab->callback([&] {
    action = [&] {
      ctx.inputs = {features_path};
      const auto table = load_features(features_path);
      StabilityOptions opt;
      opt.runs = runs;
      opt.fraction = fraction;
      opt.kmeans.restarts = restarts;
      const auto report = stability(table.values, k, seed(), opt);
      write_text(output, stability_report_to_json(report, table.heads, k, fraction, seed()));
      ctx.record({output});
      out << fmt::format("stability {:.4f} ({} runs, fraction {})\n", report.stability, runs, fraction);
      return kExitOk;
    };
  });

  // embed
  TsneConfig tsne_cfg;
  std::optional<fs::path> assignments_path;
  auto* embed = app.add_subcommand("embed", "Exact t-SNE of head features");
  embed->add_option("features", features_path, "Feature CSV")->required();
  embed->add_option("--perplexity", tsne_cfg.perplexity, "Target perplexity")->check(CLI::PositiveNumber);
  embed->add_option("--iterations", tsne_cfg.iterations, "Gradient steps")->check(CLI::PositiveNumber);
  embed->add_option("--learning-rate", tsne_cfg.learning_rate, "Step size")->check(CLI::PositiveNumber);
  embed->add_option("--assignments", assignments_path, "Cluster column source");
  embed->add_option("-o,--output", output, "Coordinate CSV (layer,head,x,y,cluster)")->required();
  add_seed(embed);
  embed->callback([&] {
    action = [&] {
      ctx.inputs = {features_path};
      const auto table = load_features(features_path);
      std::vector<std::size_t> clusters(table.heads.size(), 0);
      if (assignments_path) {
        ctx.inputs.push_back(*assignments_path);
        std::map<HeadId, std::size_t> by_head;
        for (const auto& r : assignments_from_csv(read_text(*assignments_path))) by_head[r.head] = r.cluster;
        for (std::size_t i = 0; i < table.heads.size(); ++i) {
          const auto it = by_head.find(table.heads[i]);
          if (it == by_head.end()) throw ShapeError("assignments miss a head present in the features");
          clusters[i] = it->second;
        }
      }
      tsne_cfg.seed = seed();
      const auto res = tsne(table.values, tsne_cfg);
      write_text(output, coords_to_csv(table.heads, res.coords, clusters));
      ctx.record({output});
      out << fmt::format("KL {:.6f} -> {:.6f}\n", res.initial_kl, res.final_kl);
      return kExitOk;
    };
  });

  // name
  fs::path model_path;
  std::optional<fs::path> name_output;
  auto* name = app.add_subcommand("name", "Name the clusters of a fitted 4-cluster model");
  name->add_option("model", model_path, "Model JSON written by cluster --model")->required();
  name->add_option("-o,--output", name_output, "Write cluster,type_name CSV");
  name->callback([&] {
    action = [&] {
      ctx.inputs = {model_path};
      const auto stored = cluster_model_from_json(read_text(model_path));
      const auto names = name_clusters(stored.model, stored.num_windows);
      std::string csv = "cluster,type_name\n";
      for (std::size_t c = 0; c < names.size(); ++c) csv += fmt::format("{},{}\n", c, type_name_str(names[c]));
      out << csv;
      if (name_output) {
        write_text(*name_output, csv);
        ctx.record({*name_output});
      }
      return kExitOk;
    };
  });

  // mask
  fs::path typing_path;
  MaskFlags mask_flags;
  std::string targets, mode = "prune", scopes, plan_id;
  auto* mask = app.add_subcommand("mask", "Compile an ablation mask spec");
  mask->require_subcommand(1);
  auto* mask_type = mask->add_subcommand("type", "Prune or substitute whole types");
  mask_type->add_option("--assignments", typing_path, "Typed assignment CSV")->required();
  mask_type->add_option("--targets", targets, "Comma-separated type names");
  mask_type->add_option("--mode", mode, "prune or uniform")->check(CLI::IsMember({"prune", "uniform"}));
  mask_type->add_option("-o,--output", output, "Mask spec (JSON)")->required();
  add_mask_flags(mask_type, mask_flags);
  auto* mask_dist = mask->add_subcommand("distance", "Remove intra- or inter-sentence attention per type");
  mask_dist->add_option("--assignments", typing_path, "Typed assignment CSV")->required();
  mask_dist->add_option("--scope", scopes, "type=keep|intra|inter, comma-separated");
  mask_dist->add_option("-o,--output", output, "Mask spec (JSON)")->required();
  add_mask_flags(mask_dist, mask_flags);
  auto* mask_plan = mask->add_subcommand("plan", "Compile one of the 19 experiment plans");
  mask_plan->add_option("--assignments", typing_path, "Typed assignment CSV")->required();
  mask_plan->add_option("--plan", plan_id, "Plan id p01..p19")->required();
  mask_plan->add_option("-o,--output", output, "Mask spec (JSON)")->required();
  add_mask_flags(mask_plan, mask_flags);
  auto finish_mask = [&](MaskSpec spec) {
    spec.options = mask_flags.options();
    write_text(output, mask_spec_to_json(spec));
    ctx.record({output});
    std::map<std::string, std::size_t> counts;
    for (const auto& [id, d] : spec.entries) {
      ++counts[fmt::format("{}/{}", mask_mode_name(d.mode), mask_scope_name(d.scope))];
    }
    for (const auto& [key, n] : counts) out << fmt::format("{:>14} {}\n", key, n);
    return kExitOk;
  };
  mask_type->callback([&] {
    action = [&] {
      ctx.inputs = {typing_path};
      std::set<TypeName> set;
      for (const auto& t : split_list(targets)) set.insert(type_flag(t));
      return finish_mask(make_type_mask(load_typing(typing_path), set, parse_mask_mode(mode)));
    };
  });
  mask_dist->callback([&] {
    action = [&] {
      ctx.inputs = {typing_path};
      std::map<TypeName, ScopeDirective> per_type;
      for (const auto& item : split_list(scopes)) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw UsageError(fmt::format("--scope item '{}' is not type=directive", item));
        const TypeName t = type_flag(item.substr(0, eq));
        const std::string d = item.substr(eq + 1);
        if (d == "keep") {
          per_type[t] = ScopeDirective::kKeep;
        } else if (d == "intra") {
          per_type[t] = ScopeDirective::kAblateIntra;
        } else if (d == "inter") {
          per_type[t] = ScopeDirective::kAblateInter;
        } else {
          throw UsageError(fmt::format("unknown scope directive '{}'", d));
        }
      }
      return finish_mask(make_distance_mask(load_typing(typing_path), per_type));
    };
  });
  mask_plan->callback([&] {
    action = [&] {
      ctx.inputs = {typing_path};
      const auto plans = table_plans();
      const auto it = std::find_if(plans.begin(), plans.end(), [&](const ExperimentPlan& p) { return p.id == plan_id; });
      if (it == plans.end()) throw UsageError(fmt::format("unknown plan '{}'", plan_id));
      return finish_mask(compile_plan(*it, load_typing(typing_path)));
    };
  });

  // apply
  fs::path spec_path;
  auto* apply = app.add_subcommand("apply", "Apply a mask spec to every sample of a bundle");
  apply->add_option("bundle", bundle_path, "Input bundle directory")->required();
  apply->add_option("spec", spec_path, "Mask spec JSON")->required();
  apply->add_option("-o,--output", output, "Output bundle directory")->required();
  apply->callback([&] {
    action = [&] {
      ctx.inputs = {bundle_path, spec_path};
      if (fs::exists(output) && fs::equivalent(output, bundle_path)) {
        throw UsageError("apply refuses to overwrite its input bundle");
      }
      const auto bundle = load_bundle(bundle_path);
      const auto spec = mask_spec_from_json(read_text(spec_path));
      AttentionBundle masked;
      masked.model_name = bundle.model_name;
      masked.num_layers = bundle.num_layers;
      masked.num_heads = bundle.num_heads;
      for (const auto& s : bundle.samples) masked.samples.push_back(apply_mask(s, spec));
      write_bundle(masked, output);
      ctx.record({output});
      out << fmt::format("masked {} samples into {}\n", masked.samples.size(), output.string());
      return kExitOk;
    };
  });

  // plans
  std::optional<fs::path> plans_output;
  auto* plans_cmd = app.add_subcommand("plans", "List the 19 type and distance ablation plans");
  plans_cmd->add_option("-o,--output", plans_output, "Also write the plans as JSON");
  plans_cmd->callback([&] {
    action = [&] {
      json j = json::array();
      for (const auto& p : table_plans()) {
        json actions = json::object();
        for (TypeName t : kAllTypes) {
          const auto it = p.actions.find(t);
          const TypeAction a = it == p.actions.end() ? TypeAction::kKeep : it->second;
          static constexpr std::array<std::string_view, 5> kNames = {"keep", "prune", "uniform", "ablate_intra",
                                                                     "ablate_inter"};
          actions[std::string(type_name_str(t))] = std::string(kNames[static_cast<std::size_t>(a)]);
        }
        j.push_back({{"id", p.id}, {"description", p.description}, {"actions", actions}});
        out << fmt::format("{}  {}\n", p.id, p.description);
      }
      if (plans_output) {
        write_text(*plans_output, j.dump(2) + "\n");
        ctx.record({*plans_output});
      }
      return kExitOk;
    };
  });

  // synth
  std::size_t heads_per_kind = 4, length = 64, samples = 20;
  double noise = 0.05;
  std::optional<fs::path> planted_output;
  auto* synth = app.add_subcommand("synth", "Generate a bundle with planted head patterns");
  synth->add_option("-o,--output", output, "Output bundle directory")->required();
  synth->add_option("--heads-per-kind", heads_per_kind, "Heads per pattern kind")->check(CLI::PositiveNumber);
  synth->add_option("--length", length, "Sequence length")->check(CLI::Range(4, 1 << 16));
  synth->add_option("--samples", samples, "Number of samples")->check(CLI::PositiveNumber);
  synth->add_option("--noise", noise, "Random-matrix mixing weight in [0, 1)")->check(CLI::Range(0.0, 0.999999));
  synth->add_option("--planted", planted_output, "Write the planted kinds as CSV");
  add_seed(synth);
  synth->callback([&] {
    action = [&] {
      const auto planted = gen_bundle(heads_per_kind, length, samples, noise, seed());
      write_bundle(planted.bundle, output);
      std::vector<fs::path> outs = {output};
      if (planted_output) {
        std::string csv = "layer,head,pattern,type_name\n";
        for (const auto& [id, kind] : planted.planted) {
          csv += fmt::format("{},{},{},{}\n", id.layer, id.head, pattern_name(kind), type_name_str(expected_type(kind)));
        }
        write_text(*planted_output, csv);
        outs.push_back(*planted_output);
      }
      ctx.record(outs);
      out << fmt::format("wrote {} samples, 1x{} heads, L={} to {}\n", samples, 4 * heads_per_kind, length,
                         output.string());
      return kExitOk;
    };
  });

  // render
  RenderFlags render_flags;
  std::size_t layer = 0, head = 0, sample_index = 0;
  fs::path coords_path;
  auto* render = app.add_subcommand("render", "Render SVG figures");
  render->require_subcommand(1);
  auto* r_heat = render->add_subcommand("heatmap", "One head's attention matrix");
  r_heat->add_option("bundle", bundle_path, "Bundle directory")->required();
  r_heat->add_option("--layer", layer, "Layer index");
  r_heat->add_option("--head", head, "Head index");
  r_heat->add_option("--sample", sample_index, "Sample index");
  r_heat->add_option("-o,--output", output, "Output directory; writes heatmap-<layer>-<head>.svg")->required();
  add_render_flags(r_heat, render_flags);
  r_heat->callback([&] {
    action = [&] {
      ctx.inputs = {bundle_path};
      const auto bundle = load_bundle(bundle_path, {.validate = false});
      if (sample_index >= bundle.samples.size()) throw UsageError(fmt::format("bundle has no sample {}", sample_index));
      const fs::path file = output / fmt::format("heatmap-{}-{}.svg", layer, head);
      write_text(file, render_heatmap(head_matrix(bundle.samples[sample_index], layer, head), render_flags.config()));
      ctx.record({file});
      out << file.string() << "\n";
      return kExitOk;
    };
  });
  auto* r_box = render->add_subcommand("boxplot", "Per-cluster feature box plots");
  r_box->add_option("features", features_path, "Feature CSV")->required();
  r_box->add_option("--assignments", typing_path, "Assignment CSV")->required();
  r_box->add_option("-o,--output", output, "SVG file")->required();
  add_render_flags(r_box, render_flags);
  r_box->callback([&] {
    action = [&] {
      ctx.inputs = {features_path, typing_path};
      const auto table = load_features(features_path);
      std::map<HeadId, std::size_t> by_head;
      std::size_t k_seen = 0;
      for (const auto& r : assignments_from_csv(read_text(typing_path))) {
        by_head[r.head] = r.cluster;
        k_seen = std::max(k_seen, r.cluster + 1);
      }
      std::vector<std::vector<std::vector<double>>> groups(k_seen);
      for (std::size_t i = 0; i < table.heads.size(); ++i) {
        const auto it = by_head.find(table.heads[i]);
        if (it == by_head.end()) throw ShapeError("assignments miss a head present in the features");
        groups[it->second].emplace_back(table.values.row(i).begin(), table.values.row(i).end());
      }
      write_text(output, render_boxplot(groups, render_flags.config()));
      ctx.record({output});
      return kExitOk;
    };
  });
  auto* r_scatter = render->add_subcommand("scatter", "t-SNE scatter coloured by cluster");
  r_scatter->add_option("coords", coords_path, "Coordinate CSV from embed")->required();
  r_scatter->add_option("-o,--output", output, "SVG file")->required();
  add_render_flags(r_scatter, render_flags);
  r_scatter->callback([&] {
    action = [&] {
      ctx.inputs = {coords_path};
      const auto t = coords_from_csv(read_text(coords_path));
      write_text(output, render_scatter(t.coords, t.clusters, render_flags.config()));
      ctx.record({output});
      return kExitOk;
    };
  });
  auto* r_layers = render->add_subcommand("layers", "Per-layer head type distribution");
  r_layers->add_option("--assignments", typing_path, "Typed assignment CSV")->required();
  r_layers->add_option("-o,--output", output, "SVG file")->required();
  add_render_flags(r_layers, render_flags);
  r_layers->callback([&] {
    action = [&] {
      ctx.inputs = {typing_path};
      write_text(output, render_layer_distribution(load_typing(typing_path), render_flags.config()));
      ctx.record({output});
      return kExitOk;
    };
  });
  auto* r_grid = render->add_subcommand("grid", "All heads of one sample, framed by type");
  r_grid->add_option("bundle", bundle_path, "Bundle directory")->required();
  r_grid->add_option("--assignments", typing_path, "Typed assignment CSV")->required();
  r_grid->add_option("--sample", sample_index, "Sample index");
  r_grid->add_option("-o,--output", output, "SVG file")->required();
  add_render_flags(r_grid, render_flags);
  r_grid->callback([&] {
    action = [&] {
      ctx.inputs = {bundle_path, typing_path};
      const auto bundle = load_bundle(bundle_path, {.validate = false});
      auto cfg = render_flags.config();
      cfg.grid_sample = sample_index;
      write_text(output, render_grid(bundle, load_typing(typing_path), cfg));
      ctx.record({output});
      return kExitOk;
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (!action) {
    err << app.help();
    return kExitUsage;
  }
  try {
    return action();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace attnscope::cli

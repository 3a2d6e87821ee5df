// codecpatch: codec-guided video patchification command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "codecpatch/cluster.hpp"
#include "codecpatch/cluster_io.hpp"
#include "codecpatch/error.hpp"
#include "codecpatch/ingest.hpp"
#include "codecpatch/layout_io.hpp"
#include "codecpatch/motion.hpp"
#include "codecpatch/parallel.hpp"
#include "codecpatch/patchify.hpp"
#include "codecpatch/pipeline.hpp"
#include "codecpatch/rope.hpp"
#include "codecpatch/saliency.hpp"
#include "codecpatch/signals_io.hpp"
#include "codecpatch/stats.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace codecpatch;

namespace {

constexpr const char* kToolVersion = CODECPATCH_VERSION;

// Options that affect scheduling or file lookup only, not output content.
bool is_execution_option(const std::string& name) { return name == "--help" || name == "--config" || name == "--jobs"; }

// Effective option values of a subcommand, keyed by flag name.
json run_config(const CLI::App* sub) {
  json options = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_name();
    if (is_execution_option(name) || name.empty()) continue;
    const std::string key = name.substr(name.find_first_not_of('-'));
    if (!opt->results().empty()) {
      options[key] = opt->get_expected_max() > 1 ? json(opt->results()) : json(opt->results().back());
    } else if (opt->get_items_expected_max() == 0) {
      options[key] = false;
    } else if (opt->get_default_str().empty()) {
      options[key] = nullptr;
    } else {
      options[key] = opt->get_default_str();
    }
  }
  std::string command = sub->get_name();
  for (const CLI::App* p = sub->get_parent(); p != nullptr && p->get_parent() != nullptr; p = p->get_parent()) {
    command = p->get_name() + " " + command;
  }
  return {{"command", command}, {"options", options}};
}

std::string config_comment(const json& config) {
  return "codecpatch " + std::string(kToolVersion) + " config " + config.dump();
}

// Reads `key = value` lines (# comments, [sections] ignored) into flag tokens.
std::vector<std::string> config_file_args(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  auto unquote = [&](std::string s) {
    s = trim(s);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
    return s;
  };
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ": expected key = value: " + line);
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(path.string() + ": empty key");
    if (value == "true") {
      args.push_back("--" + key);
    } else if (value == "false") {
      continue;
    } else if (!value.empty() && value.front() == '[' && value.back() == ']') {
      std::stringstream items(value.substr(1, value.size() - 2));
      std::string item;
      while (std::getline(items, item, ',')) {
        if (!trim(item).empty()) args.insert(args.end(), {"--" + key, unquote(item)});
      }
    } else {
      args.insert(args.end(), {"--" + key, unquote(value)});
    }
  }
  return args;
}

// Splices `--config FILE` contents in front of the remaining arguments so
// explicit flags override file values.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string file;
    std::size_t erase_count = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[i + 1];
      erase_count = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
      erase_count = 1;
    } else {
      continue;
    }
    auto injected = config_file_args(file);
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + erase_count));
    // Keep --config itself so it is visible to the parser (and ignored in the record).
    injected.push_back("--config=" + file);
    std::size_t insert_at = i;
    while (insert_at > 0 && args[insert_at - 1].rfind("--", 0) == 0 && args[insert_at - 1].find('=') == std::string::npos) {
      --insert_at;  // never split a flag from its value
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(insert_at), injected.begin(), injected.end());
    break;
  }
  return args;
}

struct ClipOptions {
  std::vector<std::string> inputs;
  int height = 224;
  int width = 224;
  int patch_size = kDefaultPatchSize;
  int gop = kDefaultGopLength;
  int block_size = 16;
  int search_range = 16;
  std::string signals;
  int jobs = 1;

  Geometry geometry() const { return {height, width, patch_size}; }
  MotionConfig motion() const { return {block_size, search_range}; }
};

void add_clip_options(CLI::App* sub, ClipOptions& o, bool many_inputs) {
  if (many_inputs) {
    sub->add_option("--input", o.inputs, "Frame directory, .ppm image or .yuv clip (repeatable)")->required();
  } else {
    sub->add_option("--input", o.inputs, "Frame directory, .ppm image or .yuv clip")->required()->expected(1);
  }
  sub->add_option("--height", o.height, "Target frame height (0 keeps native size)");
  sub->add_option("--width", o.width, "Target frame width (0 keeps native size)");
  sub->add_option("--patch-size", o.patch_size, "Patch size in pixels");
  sub->add_option("--gop", o.gop, "GOP length in frames")->check(CLI::PositiveNumber);
  sub->add_option("--block-size", o.block_size, "Motion block size");
  sub->add_option("--search-range", o.search_range, "Motion search range in pixels");
  sub->add_option("--signals", o.signals, "Codec signal sidecar (.sig); estimated by block matching when absent");
  sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

ClipSignals clip_signals(const RawClip& clip, const GopPartition& gops, const ClipOptions& o, const std::string& signals,
                         int jobs) {
  if (!signals.empty()) return import_codec_signals(signals, clip, gops);
  return estimate_clip_signals(clip, gops, o.motion(), jobs);
}

// Sidecar per input: with several inputs --signals names a directory holding <clip>.sig.
std::string signals_for(const ClipOptions& o, const RawClip& clip) {
  if (o.signals.empty() || o.inputs.size() == 1) return o.signals;
  return (fs::path(o.signals) / (clip.source_id + ".sig")).string();
}

std::string format_accounting(const std::string& name, const TokenAccounting& acc, int dense_T, int p0) {
  std::ostringstream out;
  char buf[128];
  out << "clip " << name << "\n";
  out << "tokens " << acc.tokens << " of " << static_cast<long long>(dense_T) * p0 << "\n";
  std::snprintf(buf, sizeof buf, "gamma %.6f (%.2f%% reduction)\n", acc.gamma, 100.0 * acc.gamma);
  out << buf;
  if (!acc.per_gop.empty()) {
    out << "gop start length tokens gamma\n";
    for (std::size_t n = 0; n < acc.per_gop.size(); ++n) {
      const auto& g = acc.per_gop[n];
      std::snprintf(buf, sizeof buf, "%zu %d %d %lld %.6f\n", n, g.segment.start, g.segment.length,
                    static_cast<long long>(g.tokens), g.gamma);
      out << buf;
    }
  }
  return out.str();
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

// ---------------------------------------------------------------- patchify

struct PatchifyOptions {
  ClipOptions clip;
  std::string mode = "codec";
  std::string out_dir = ".";
  std::string name;
  std::optional<std::int64_t> budget;
  std::optional<double> ratio;
  bool gop_budget = false;
  int chunks = 8;
  std::uint64_t seed = 0;
  double alpha = 0.5;
  bool camera_comp = false;
};

int cmd_patchify(const PatchifyOptions& o, const json& config) {
  const auto mode = parse_layout_mode(o.mode);
  if (!o.name.empty() && o.clip.inputs.size() > 1) throw ConfigError("--name requires a single input");
  const fs::path out_dir = prepare_out_dir(o.out_dir);
  std::vector<std::string> reports(o.clip.inputs.size());
  const bool many = o.clip.inputs.size() > 1;

  parallel_for(o.clip.inputs.size(), many ? o.clip.jobs : 1, [&](std::size_t i) {
    const int inner_jobs = many ? 1 : o.clip.jobs;
    const auto clip = load_clip(o.clip.inputs[i], o.clip.geometry());
    TokenLayout layout;
    switch (mode) {
      case LayoutMode::codec: {
        CodecOptions options;
        options.gop_length = o.clip.gop;
        options.budget = o.budget;
        options.ratio = o.ratio;
        options.per_gop_budget = o.gop_budget;
        options.motion = o.clip.motion();
        options.fusion = {o.alpha, o.camera_comp};
        options.jobs = inner_jobs;
        const auto gops = partition_gops(clip, o.clip.gop);
        layout = run_codec(clip, clip_signals(clip, gops, o.clip, signals_for(o.clip, clip), inner_jobs), options).layout;
        break;
      }
      case LayoutMode::chunk: layout = patchify_chunk(clip, o.chunks, o.seed); break;
      case LayoutMode::image: layout = patchify_image(clip); break;
    }
    if (!positions_unique(layout)) throw InvariantError("duplicate token positions in layout of " + clip.source_id);
    layout.metadata["config"] = config;
    layout.metadata["tool_version"] = kToolVersion;
    layout.metadata["fusion_alpha"] = o.alpha;
    const std::string name = o.name.empty() ? clip.source_id : o.name;
    write_layout(out_dir / name, layout);
    const auto acc = token_accounting(layout, clip.num_frames());
    reports[i] = format_accounting(name, acc, clip.num_frames(), clip.patches_per_frame());
  });
  for (const auto& r : reports) std::cout << r;
  return 0;
}

// ---------------------------------------------------------------- saliency

struct SaliencyOptions {
  ClipOptions clip;
  std::string out_dir = ".";
  double alpha = 0.5;
  bool camera_comp = false;
  bool per_frame = false;
};

std::string format_scores(const std::vector<PatchSaliencyGrid>& grids, const std::string& comment) {
  std::string out = "# " + comment + "\n# t y x motion_sum residual_sum fused\n";
  char buf[160];
  for (const auto& g : grids) {
    for (int y = 0; y < g.grid_h; ++y) {
      for (int x = 0; x < g.grid_w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * g.grid_w + x;
        std::snprintf(buf, sizeof buf, "%u %d %d %.9g %.9g %.9g\n", g.frame_index, y, x, g.motion_sum[i], g.residual_sum[i],
                      g.scores[i]);
        out += buf;
      }
    }
  }
  return out;
}

int cmd_saliency(const SaliencyOptions& o, const json& config) {
  const fs::path out_dir = prepare_out_dir(o.out_dir);
  const bool many = o.clip.inputs.size() > 1;
  const std::string comment = config_comment(config);
  parallel_for(o.clip.inputs.size(), many ? o.clip.jobs : 1, [&](std::size_t i) {
    const int inner_jobs = many ? 1 : o.clip.jobs;
    const auto clip = load_clip(o.clip.inputs[i], o.clip.geometry());
    const auto gops = partition_gops(clip, o.clip.gop);
    const auto signals = clip_signals(clip, gops, o.clip, signals_for(o.clip, clip), inner_jobs);
    const FusionConfig fusion{o.alpha, o.camera_comp};
    const auto grids = saliency_grids(signals, clip.patch_size, fusion, !o.per_frame, inner_jobs);
    double clip_max = 0.0;
    for (const auto& g : grids) {
      for (double s : g.scores) clip_max = std::max(clip_max, s);
    }
    for (const auto& g : grids) {
      const double frame_max = *std::max_element(g.scores.begin(), g.scores.end());
      char name[64];
      std::snprintf(name, sizeof name, ".heat_%05u.ppm", g.frame_index);
      write_ppm(out_dir / (clip.source_id + name), render_heatmap(g, clip.patch_size, o.per_frame ? frame_max : clip_max),
                comment);
    }
    io::write_text(out_dir / (clip.source_id + ".scores.txt"), format_scores(grids, comment));
  });
  return 0;
}

// ---------------------------------------------------------------- signals

int cmd_export_signals(const ClipOptions& o, const std::string& out, const json& config) {
  const auto clip = load_clip(o.inputs.front(), o.geometry());
  const auto gops = partition_gops(clip, o.gop);
  const auto signals = estimate_clip_signals(clip, gops, o.motion(), o.jobs);
  write_signals(out, make_signals_file(clip, o.block_size, signals));
  json meta{{"config", config}, {"tool_version", kToolVersion}, {"records", signals.size()}, {"clip_ref", clip.source_id}};
  io::write_text(out + ".json", meta.dump(2) + "\n");
  std::cout << "wrote " << signals.size() << " P-frame records to " << out << "\n";
  return 0;
}

int cmd_import_check(const ClipOptions& o) {
  if (o.signals.empty()) throw ConfigError("import-check needs --signals");
  const auto clip = load_clip(o.inputs.front(), o.geometry());
  const auto gops = partition_gops(clip, o.gop);
  const auto signals = import_codec_signals(o.signals, clip, gops);
  double motion = 0.0;
  double energy = 0.0;
  for (const auto& s : signals) {
    for (const auto& v : s.motion.vectors) motion += std::hypot(v.dy, v.dx);
    for (float e : s.residual.energy) energy += e;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "ok frames %d p_frames %zu block %d mean_block_motion %.6f total_residual %.6g\n",
                clip.num_frames(), signals.size(), signals.empty() ? 0 : signals.front().motion.block_size,
                signals.empty() ? 0.0 : motion / static_cast<double>(signals.size() * signals.front().motion.vectors.size()),
                energy);
  std::cout << buf;
  return 0;
}

// ---------------------------------------------------------------- intervene

struct InterveneOptions {
  std::string layout;
  std::string kind;
  std::string donor;
  std::string input;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_intervene(const InterveneOptions& o, const json& config) {
  const auto layout = read_layout(o.layout);
  const auto kind = parse_intervention(o.kind);
  std::optional<RawClip> source;
  std::optional<TokenLayout> donor;
  if (kind == InterventionKind::nonmotion_swap) {
    if (o.input.empty()) throw ConfigError("nonmotion_swap needs --input (the layout's source clip)");
    source = load_clip(o.input, {layout.grid_h * layout.patch_size, layout.grid_w * layout.patch_size, layout.patch_size});
  }
  if (!o.donor.empty()) donor = read_layout(o.donor);
  auto result = intervene(layout, kind, o.seed, source ? &*source : nullptr, donor ? &*donor : nullptr);
  for (int t : result.skipped_frames) {
    std::cerr << "warning: frame " << t << " has no unselected patches; left unchanged\n";
  }
  if (!positions_unique(result.layout)) throw InvariantError("intervention produced duplicate positions");
  result.layout.metadata["config"] = config;
  result.layout.metadata["tool_version"] = kToolVersion;
  write_layout(o.out, result.layout);
  std::cout << to_string(kind) << " tokens " << result.layout.tokens.size() << " skipped_frames "
            << result.skipped_frames.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------- stats

int cmd_stats(const std::vector<std::string>& paths, const std::string& out, const json& config) {
  std::vector<TokenLayout> layouts;
  for (const auto& p : paths) layouts.push_back(read_layout(p));
  const auto text = format_stats(layout_stats(layouts), layouts.size(), config_comment(config));
  if (out.empty()) {
    std::cout << text;
  } else {
    io::write_text(out, text);
  }
  return 0;
}

// ---------------------------------------------------------------- cluster

int cmd_cluster_fit(const std::string& embeddings, std::size_t k, int iters, std::uint64_t seed, const std::string& out,
                    const json& config) {
  const auto points = read_embeddings(embeddings);
  const auto result = kmeans(points, k, iters, seed);
  write_bank(out, result.bank);
  json meta{{"config", config}, {"tool_version", kToolVersion}, {"objective_history", result.objective_history}};
  io::write_text(out + ".json", meta.dump(2) + "\n");
  char buf[96];
  std::snprintf(buf, sizeof buf, "k %zu iterations %zu objective %.9g\n", k, result.objective_history.size() - 1,
                result.objective());
  std::cout << buf;
  return 0;
}

int cmd_cluster_assign(const std::string& embeddings, const std::string& bank_path, std::size_t top_l, const std::string& out,
                       const json& config) {
  const auto points = read_embeddings(embeddings);
  const auto bank = read_bank(bank_path);
  std::string text = "# " + config_comment(config) + "\n# sample_id positives...\n";
  for (const auto& e : points) {
    if (e.modality() != bank.modality) throw ConfigError("embedding and bank modalities differ");
    const auto a = assign_topL(e, bank, top_l);
    text += std::to_string(a.sample_id);
    for (auto k : a.positives) text += " " + std::to_string(k);
    text += "\n";
  }
  if (out.empty()) {
    std::cout << text;
  } else {
    io::write_text(out, text);
  }
  return 0;
}

int cmd_cluster_loss(const std::vector<std::string>& embedding_files, const std::string& obj_bank, const std::string& vid_bank,
                     std::size_t top_l, double neg_ratio, std::uint64_t seed, const std::string& out, const json& config) {
  UnionBank bank;
  if (!obj_bank.empty()) bank.obj = read_bank(obj_bank);
  if (!vid_bank.empty()) bank.vid = read_bank(vid_bank);
  std::vector<Embedding> batch;
  for (const auto& f : embedding_files) {
    auto part = read_embeddings(f);
    batch.insert(batch.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  std::vector<LabelAssignment> assignments;
  for (const auto& e : batch) {
    const auto& b = bank.of(e.modality());
    if (b.size() == 0) throw ConfigError("no " + to_string(e.modality()) + " bank for " + to_string(e.modality()) + " embeddings");
    assignments.push_back(assign_topL(e, b, top_l));
  }
  const auto pairs = sample_pairs(batch, bank, assignments, neg_ratio, seed);
  const auto result = evaluate_pairs(std::span<const Embedding>(batch), bank, pairs);
  double ge = 0.0;
  for (const auto& g : result.grad_e) ge += inner(g, g);
  double gc = 0.0;
  for (const auto& g : result.grad_c) gc += inner(g.grad, g.grad);
  json report{{"config", config},
              {"tool_version", kToolVersion},
              {"loss", result.loss},
              {"pairs", pairs.size()},
              {"grad_e_norm", std::sqrt(ge)},
              {"grad_c_norm", std::sqrt(gc)},
              {"sampled_centroids", result.grad_c.size()}};
  if (!out.empty()) io::write_text(out, report.dump(2) + "\n");
  char buf[128];
  std::snprintf(buf, sizeof buf, "loss %.12g pairs %zu\n", result.loss, pairs.size());
  std::cout << buf;
  return 0;
}

// ---------------------------------------------------------------- rope-check

int cmd_rope_check(const std::string& out, int count, std::uint64_t seed, int head_dim, double base, const json& config) {
  RopeConfig cfg;
  cfg.head_dim = head_dim;
  cfg.base = base;
  const RopeTable table(cfg);
  Rng rng(seed);
  auto vec = [&] {
    std::vector<double> v(static_cast<std::size_t>(head_dim));
    for (auto& x : v) x = 2.0 * uniform_unit(rng) - 1.0;
    return v;
  };
  auto pos = [&](LayoutMode mode) {
    const auto t = mode == LayoutMode::image ? 0 : static_cast<std::int64_t>(uniform_index(rng, kVirtualGridFrames));
    return PositionTriple{t, static_cast<std::int64_t>(uniform_index(rng, 32)), static_cast<std::int64_t>(uniform_index(rng, 32))};
  };
  json records = json::array();
  const LayoutMode modes[] = {LayoutMode::codec, LayoutMode::chunk, LayoutMode::image};
  for (int i = 0; i < count; ++i) {
    const auto mode = modes[i % 3];
    const auto q = vec();
    const auto k = vec();
    const auto pq = pos(mode);
    const auto pk = pos(mode);
    const auto off = relative_offset(mode, {mode, pq}, {mode, pk});
    records.push_back({{"mode", to_string(mode)},
                       {"p1", {pq.t, pq.y, pq.x}},
                       {"p2", {pk.t, pk.y, pk.x}},
                       {"offset", {off.dt, off.dx, off.dy}},
                       {"q", q},
                       {"k", k},
                       {"q_rot", rotate(q, effective_position(mode, pq), table)},
                       {"k_rot", rotate(k, effective_position(mode, pk), table)},
                       {"score", rope_score(mode, q, pq, k, pk, table)}});
  }
  const auto split = rope_pair_split(cfg);
  json fixture{{"config", config},
               {"tool_version", kToolVersion},
               {"head_dim", head_dim},
               {"base", base},
               {"split_ratio", {cfg.split[0], cfg.split[1], cfg.split[2]}},
               {"pair_split", {split[0], split[1], split[2]}},
               {"records", records}};
  io::write_text(out, fixture.dump(2) + "\n");
  std::cout << "wrote " << count << " records to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Codec-guided sparse video patchification", "codecpatch"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto with_config = [](CLI::App* sub) {
    sub->add_option("--config", "Read flags from a key = value file");
    return sub;
  };

  PatchifyOptions patchify;
  auto* patchify_cmd = with_config(app.add_subcommand("patchify", "Build token layouts"));
  add_clip_options(patchify_cmd, patchify.clip, true);
  patchify_cmd->add_option("--mode", patchify.mode, "codec | chunk | image")->check(CLI::IsMember({"codec", "chunk", "image"}));
  patchify_cmd->add_option("--out-dir", patchify.out_dir, "Output directory");
  patchify_cmd->add_option("--name", patchify.name, "Output base name (single input)");
  auto* budget_opt = patchify_cmd->add_option("--budget", patchify.budget, "Clip token budget (codec mode, default 2048)");
  auto* ratio_opt = patchify_cmd->add_option("--ratio", patchify.ratio, "Fixed per-frame patch ratio (codec mode)");
  budget_opt->excludes(ratio_opt);
  patchify_cmd->add_flag("--gop-budget", patchify.gop_budget, "Enforce the budget per GOP instead of per clip");
  patchify_cmd->add_option("--chunks", patchify.chunks, "Chunk count (chunk mode)");
  patchify_cmd->add_option("--seed", patchify.seed, "Sampling seed");
  patchify_cmd->add_option("--alpha", patchify.alpha, "Motion weight in saliency fusion")->check(CLI::Range(0.0, 1.0));
  patchify_cmd->add_flag("--camera-comp", patchify.camera_comp, "Subtract the median motion vector per frame");

  SaliencyOptions saliency;
  auto* saliency_cmd = with_config(app.add_subcommand("saliency", "Write patch saliency heatmaps and scores"));
  add_clip_options(saliency_cmd, saliency.clip, true);
  saliency_cmd->add_option("--out-dir", saliency.out_dir, "Output directory");
  saliency_cmd->add_option("--alpha", saliency.alpha, "Motion weight in saliency fusion")->check(CLI::Range(0.0, 1.0));
  saliency_cmd->add_flag("--camera-comp", saliency.camera_comp, "Subtract the median motion vector per frame");
  saliency_cmd->add_flag("--per-frame", saliency.per_frame, "Normalize each frame separately");

  ClipOptions export_clip;
  std::string export_out;
  auto* export_cmd = with_config(app.add_subcommand("export-signals", "Estimate motion/residual signals and write a sidecar"));
  add_clip_options(export_cmd, export_clip, false);
  export_cmd->add_option("--out", export_out, "Output .sig path")->required();

  ClipOptions import_clip;
  auto* import_cmd = with_config(app.add_subcommand("import-check", "Validate a signal sidecar against a clip"));
  add_clip_options(import_cmd, import_clip, false);

  InterveneOptions intervene_opts;
  auto* intervene_cmd = with_config(app.add_subcommand("intervene", "Apply an ablation intervention to a codec layout"));
  intervene_cmd->add_option("--layout", intervene_opts.layout, "Input layout base path")->required();
  intervene_cmd->add_option("--kind", intervene_opts.kind, "nonmotion_swap | crossvideo_swap | position_shuffle")
      ->required()
      ->check(CLI::IsMember({"nonmotion_swap", "crossvideo_swap", "position_shuffle"}));
  intervene_cmd->add_option("--donor", intervene_opts.donor, "Donor layout (crossvideo_swap)");
  intervene_cmd->add_option("--input", intervene_opts.input, "Source clip of the layout (nonmotion_swap)");
  intervene_cmd->add_option("--seed", intervene_opts.seed, "Intervention seed");
  intervene_cmd->add_option("--out", intervene_opts.out, "Output layout base path")->required();

  std::vector<std::string> stats_layouts;
  std::string stats_out;
  auto* stats_cmd = with_config(app.add_subcommand("stats", "Spatial histogram, token accumulation and center bias"));
  stats_cmd->add_option("--layout", stats_layouts, "Layout base path (repeatable)")->required();
  stats_cmd->add_option("--out", stats_out, "Output text file (default stdout)");

  auto* cluster_cmd = app.add_subcommand("cluster", "Clustering and discrimination-loss tools");
  cluster_cmd->require_subcommand(1);

  std::string fit_embeddings, fit_out;
  std::size_t fit_k = 0;
  int fit_iters = 50;
  std::uint64_t fit_seed = 0;
  auto* fit_cmd = with_config(cluster_cmd->add_subcommand("fit", "k-means over an embedding file"));
  fit_cmd->add_option("--embeddings", fit_embeddings, "Embedding file")->required();
  fit_cmd->add_option("--k", fit_k, "Cluster count")->required();
  fit_cmd->add_option("--iters", fit_iters, "Maximum Lloyd iterations");
  fit_cmd->add_option("--seed", fit_seed, "Seeding seed");
  fit_cmd->add_option("--out", fit_out, "Output bank file")->required();

  std::string assign_embeddings, assign_bank, assign_out;
  std::size_t assign_l = 10;
  auto* assign_cmd = with_config(cluster_cmd->add_subcommand("assign", "Top-L centroid labels per embedding"));
  assign_cmd->add_option("--embeddings", assign_embeddings, "Embedding file")->required();
  assign_cmd->add_option("--bank", assign_bank, "Centroid bank file")->required();
  assign_cmd->add_option("--topl", assign_l, "Positive labels per sample");
  assign_cmd->add_option("--out", assign_out, "Output text file (default stdout)");

  std::vector<std::string> loss_embeddings;
  std::string loss_obj_bank, loss_vid_bank, loss_out;
  std::size_t loss_l = 10;
  double loss_ratio = 0.1;
  std::uint64_t loss_seed = 0;
  auto* loss_cmd = with_config(cluster_cmd->add_subcommand("loss", "Sampled multi-label discrimination loss"));
  loss_cmd->add_option("--embeddings", loss_embeddings, "Embedding file (repeatable)")->required();
  loss_cmd->add_option("--obj-bank", loss_obj_bank, "Object centroid bank");
  loss_cmd->add_option("--vid-bank", loss_vid_bank, "Video centroid bank");
  loss_cmd->add_option("--topl", loss_l, "Positive labels per sample");
  loss_cmd->add_option("--neg-ratio", loss_ratio, "Ratio of sampled negative centroids");
  loss_cmd->add_option("--seed", loss_seed, "Negative sampling seed");
  loss_cmd->add_option("--out", loss_out, "Output JSON report");

  std::string rope_out;
  int rope_count = 64;
  std::uint64_t rope_seed = 0;
  int rope_head_dim = 64;
  double rope_base = 10000.0;
  auto* rope_cmd = with_config(app.add_subcommand("rope-check", "Write 3D-RoPE agreement fixtures"));
  rope_cmd->add_option("--out", rope_out, "Output fixture JSON")->required();
  rope_cmd->add_option("--count", rope_count, "Record count")->check(CLI::PositiveNumber);
  rope_cmd->add_option("--seed", rope_seed, "Fixture seed");
  rope_cmd->add_option("--head-dim", rope_head_dim, "Head dimension");
  rope_cmd->add_option("--base", rope_base, "Frequency base");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  }

  try {
    if (patchify_cmd->parsed()) return cmd_patchify(patchify, run_config(patchify_cmd));
    if (saliency_cmd->parsed()) return cmd_saliency(saliency, run_config(saliency_cmd));
    if (export_cmd->parsed()) return cmd_export_signals(export_clip, export_out, run_config(export_cmd));
    if (import_cmd->parsed()) return cmd_import_check(import_clip);
    if (intervene_cmd->parsed()) return cmd_intervene(intervene_opts, run_config(intervene_cmd));
    if (stats_cmd->parsed()) return cmd_stats(stats_layouts, stats_out, run_config(stats_cmd));
    if (fit_cmd->parsed()) return cmd_cluster_fit(fit_embeddings, fit_k, fit_iters, fit_seed, fit_out, run_config(fit_cmd));
    if (assign_cmd->parsed()) return cmd_cluster_assign(assign_embeddings, assign_bank, assign_l, assign_out, run_config(assign_cmd));
    if (loss_cmd->parsed()) {
      return cmd_cluster_loss(loss_embeddings, loss_obj_bank, loss_vid_bank, loss_l, loss_ratio, loss_seed, loss_out,
                              run_config(loss_cmd));
    }
    if (rope_cmd->parsed()) return cmd_rope_check(rope_out, rope_count, rope_seed, rope_head_dim, rope_base, run_config(rope_cmd));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::invariant);
  }
  return static_cast<int>(ErrorKind::config);
}

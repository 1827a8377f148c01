// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mum/config_io.hpp"
#include "mum/errors.hpp"
#include "mum/kernels.hpp"
#include "mum/pipeline.hpp"
#include "mum/training.hpp"

namespace mum::cli {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupt{false};

extern "C" void on_sigint(int) { g_interrupt.store(true); }

// Raised after validation problems have been printed.
struct Invalid {};

class Problems {
 public:
  void add(std::string p) { list_.push_back(std::move(p)); }
  void add_all(const std::vector<std::string>& ps) { list_.insert(list_.end(), ps.begin(), ps.end()); }
  bool empty() const { return list_.empty(); }

  void throw_if_any(std::ostream& err) const {
    if (list_.empty()) return;
    for (const auto& p : list_) err << "error: " << p << "\n";
    throw Invalid{};
  }

 private:
  std::vector<std::string> list_;
};

// Options shared by every command that builds a RunConfig.
struct CommonArgs {
  std::string preset = "desk";
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--preset", a.preset, "Default values: desk or full")->capture_default_str();
  cmd->add_option("--config", a.config_path, "JSON config file (flags win over it)");
  cmd->add_option("--seed", a.seed, "Seed for data order, masks, init and probe");
  cmd->add_flag("--deterministic", a.deterministic, "Force the scalar kernels");
}

RunConfig build_config(const CommonArgs& a, Problems& problems) {
  RunConfig c;
  if (a.preset == "desk")
    c = desk_preset();
  else if (a.preset == "full")
    c = full_preset();
  else
    problems.add("--preset: expected 'desk' or 'full', got '" + a.preset + "'");
  if (a.config_path) {
    std::ifstream is(*a.config_path);
    if (!is) {
      problems.add("--config: cannot read " + *a.config_path);
    } else {
      try {
        const auto j = nlohmann::json::parse(is);
        std::vector<std::string> ps;
        read_json(j, c, ps);
        problems.add_all(ps);
      } catch (const nlohmann::json::parse_error& e) {
        problems.add("--config: " + *a.config_path + ": " + e.what());
      }
    }
  }
  if (a.seed) {
    c.seed = *a.seed;
    c.apply_seed();
  }
  if (a.deterministic) c.deterministic = true;
  return c;
}

void apply_backend(const RunConfig& c) {
  if (c.deterministic) kernels::set_backend(kernels::Backend::kScalar);
}

std::optional<bool> parse_switch(const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  return std::nullopt;
}

void apply_ablation(const std::string& spec, RunConfig& c, Problems& problems) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    problems.add("--ablate " + spec + ": expected key=value");
    return;
  }
  const std::string key = spec.substr(0, eq), value = spec.substr(eq + 1);
  const std::string where = "--ablate " + key + ": ";
  if (key == "reference_view") {
    if (auto b = parse_switch(value))
      c.train.reference_view = *b;
    else
      problems.add(where + "expected on or off, got '" + value + "'");
  } else if (key == "mask_ratio") {
    try {
      std::size_t used = 0;
      c.train.mask_ratio = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      problems.add(where + "expected a number, got '" + value + "'");
    }
  } else if (key == "comm_site") {
    try {
      c.model.comm_site = parse_comm_site(value);
    } catch (const ConfigError& e) {
      problems.add(where + e.what());
    }
  } else if (key == "pos_mode") {
    try {
      c.model.pos_mode = parse_pos_mode(value);
    } catch (const ConfigError& e) {
      problems.add(where + e.what());
    }
  } else if (key == "target") {
    if (value == "normalized")
      c.train.normalize_target = true;
    else if (value == "raw")
      c.train.normalize_target = false;
    else
      problems.add(where + "expected normalized or raw, got '" + value + "'");
  } else {
    problems.add("--ablate: unknown key '" + key +
                 "' (reference_view, mask_ratio, comm_site, pos_mode, target)");
  }
}

// A manifest file, or a directory holding manifest.json. Empty means $MUM_DATA_DIR.
std::optional<fs::path> resolve_data(const std::string& arg, const std::string& flag, Problems& problems) {
  std::string raw = arg;
  if (raw.empty()) {
    const char* env = std::getenv("MUM_DATA_DIR");
    if (!env || !*env) {
      problems.add(flag + ": not given and MUM_DATA_DIR is unset");
      return std::nullopt;
    }
    raw = env;
  }
  fs::path p = raw;
  if (fs::is_directory(p)) p /= "manifest.json";
  if (!fs::is_regular_file(p)) {
    problems.add(flag + ": no manifest at " + p.string());
    return std::nullopt;
  }
  return p;
}

// A checkpoint directory, a checkpoint root holding `latest`, or a run
// directory holding checkpoints/latest.
std::optional<fs::path> resolve_checkpoint(const fs::path& p) {
  if (fs::is_regular_file(p / "manifest.json")) return p;
  for (const fs::path& root : {p, p / "checkpoints"}) {
    std::ifstream is(root / "latest");
    std::string name;
    if (is && std::getline(is, name) && !name.empty() && fs::is_regular_file(root / name / "manifest.json"))
      return root / name;
  }
  return std::nullopt;
}

std::optional<fs::path> require_checkpoint(const std::string& arg, const std::string& flag, Problems& problems) {
  if (arg.empty()) {
    problems.add(flag + ": required");
    return std::nullopt;
  }
  auto p = resolve_checkpoint(arg);
  if (!p) problems.add(flag + ": no checkpoint at " + arg);
  return p;
}

void check_output_parent(const fs::path& p, const std::string& flag, Problems& problems) {
  const fs::path parent = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (fs::exists(parent) && !fs::is_directory(parent)) problems.add(flag + ": " + parent.string() + " is not a directory");
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string out;
  std::size_t scenes = 4;
  std::size_t views = 6;
  std::size_t size = 64;
  std::uint64_t seed = 0;
  bool no_warps = false;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out, std::ostream& err) {
  Problems problems;
  std::string dir = a.out;
  if (dir.empty()) {
    const char* env = std::getenv("MUM_DATA_DIR");
    if (env && *env)
      dir = env;
    else
      problems.add("--out: not given and MUM_DATA_DIR is unset");
  }
  if (a.scenes == 0) problems.add("--scenes: must be at least 1");
  if (a.views == 0) problems.add("--views: must be at least 1");
  if (a.size < 32) problems.add("--size: synthetic images must be at least 32 pixels");
  if (!dir.empty() && fs::exists(dir) && !fs::is_directory(dir)) problems.add("--out: " + dir + " is not a directory");
  problems.throw_if_any(err);

  DatasetSpec spec;
  spec.scenes = a.scenes;
  spec.views = a.views;
  spec.size = a.size;
  spec.seed = a.seed;
  spec.warps = !a.no_warps;
  const fs::path manifest = write_synthetic_dataset(dir, spec);
  out << "wrote " << a.scenes << " scenes x " << a.views << " views: " << manifest.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- pretrain

struct PretrainArgs {
  CommonArgs common;
  std::string data;
  std::string out;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> warmup;
  std::optional<double> lr;
  std::optional<std::size_t> log_interval;
  std::optional<std::size_t> checkpoint_interval;
  std::optional<std::size_t> stop_after;
  std::string resume;
  std::vector<std::string> ablate;
  bool quiet = false;
};

int cmd_pretrain(const PretrainArgs& a, std::ostream& out, std::ostream& err) {
  Problems problems;
  RunConfig c = build_config(a.common, problems);
  if (a.steps) c.train.total_steps = *a.steps;
  if (a.warmup) c.train.warmup_steps = *a.warmup;
  if (a.lr) c.train.base_lr = *a.lr;
  if (a.log_interval) c.train.log_interval = *a.log_interval;
  if (a.checkpoint_interval) c.train.checkpoint_interval = *a.checkpoint_interval;
  for (const auto& s : a.ablate) apply_ablation(s, c, problems);
  problems.add_all(c.problems());
  const auto manifest = resolve_data(a.data, "--data", problems);
  if (a.out.empty()) problems.add("--out: required");
  else if (fs::exists(a.out) && !fs::is_directory(a.out)) problems.add("--out: " + a.out + " is not a directory");
  std::optional<fs::path> resume;
  if (!a.resume.empty()) resume = require_checkpoint(a.resume, "--resume", problems);
  problems.throw_if_any(err);

  apply_backend(c);
  const auto scenes = load_manifest_scenes(*manifest);
  const TrainingData data = training_data(scenes);

  const fs::path run_dir = a.out;
  fs::create_directories(run_dir);
  {
    std::ofstream cfg_os(run_dir / "config.json", std::ios::trunc);
    cfg_os << to_json(c).dump(2) << "\n";
    if (!cfg_os) throw std::runtime_error("cannot write " + (run_dir / "config.json").string());
  }

  TrainOptions opts;
  opts.checkpoint_dir = run_dir / "checkpoints";
  opts.metrics_path = run_dir / "metrics.csv";
  opts.resume_from = resume;
  opts.stop_after = a.stop_after;
  opts.interrupt = &g_interrupt;
  if (!a.quiet) {
    const std::size_t every = c.train.log_interval;
    opts.on_step = [&out, every](const StepRecord& r) {
      if (every > 0 && r.step % every == 0) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "step %llu loss %.6f lr %.3g\n", static_cast<unsigned long long>(r.step),
                      r.loss, r.lr);
        out << buf << std::flush;
      }
    };
  }

  g_interrupt.store(false);
  auto previous = std::signal(SIGINT, on_sigint);
  TrainResult result;
  try {
    result = train(data.pools, data.single_view_pool, c.train, c.model, c.sampler, opts);
  } catch (...) {
    std::signal(SIGINT, previous);
    throw;
  }
  std::signal(SIGINT, previous);

  if (result.interrupted) {
    err << "interrupted after step " << result.state.step << "; checkpoint: " << result.final_checkpoint.string()
        << "\n";
    return kRuntimeError;
  }
  out << "finished at step " << result.state.step << "; checkpoint: " << result.final_checkpoint.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- probe

struct ProbeArgs {
  CommonArgs common;
  std::string checkpoint;
  std::string data;
  std::string train_data;
  std::string layer;
  std::string mode = "probe";
  std::string out;
  std::optional<std::size_t> probe_steps;
  std::optional<double> probe_lr;
  bool untrained = false;
};

struct LayerScore {
  std::vector<MatchMetrics> per_pair;
  MatchMetrics pooled;
};

LayerScore score_layer(std::span<const ImagePair> train_pairs, std::span<const ImagePair> eval_pairs,
                       const ModelParams<float>& params, std::size_t layer, bool cosine, const ProbeConfig& pc,
                       const PatchGrid& grid) {
  LayerScore s;
  const auto eval = probe_pairs(eval_pairs, params, layer);
  if (cosine) {
    for (const auto& p : eval) s.per_pair.push_back(match_metrics(cosine_match(p.feat_a, p.feat_b, grid, true), p.gt, grid));
  } else {
    const auto train = probe_pairs(train_pairs, params, layer);
    s.per_pair = train_probe(train, eval, grid, pc).per_pair;
  }
  s.pooled = pool_metrics(s.per_pair);
  return s;
}

std::uint64_t checkpoint_train_seed(const fs::path& ckpt) {
  std::ifstream is(ckpt / "manifest.json");
  const auto j = nlohmann::json::parse(is);
  return j.at("train_config").at("seed").get<std::uint64_t>();
}

int cmd_probe(const ProbeArgs& a, std::ostream& out, std::ostream& err) {
  Problems problems;
  RunConfig c = build_config(a.common, problems);
  if (a.probe_steps) c.probe.train_steps = *a.probe_steps;
  if (a.probe_lr) c.probe.probe_lr = *a.probe_lr;
  problems.add_all(c.probe.problems());
  const auto ckpt = require_checkpoint(a.checkpoint, "--checkpoint", problems);
  const auto manifest = resolve_data(a.data, "--data", problems);
  std::optional<fs::path> train_manifest;
  if (!a.train_data.empty()) train_manifest = resolve_data(a.train_data, "--train-data", problems);
  const bool cosine = a.mode == "cosine";
  if (a.mode != "probe" && !cosine) problems.add("--mode: expected probe or cosine, got '" + a.mode + "'");
  const bool sweep = a.layer == "all";
  std::optional<std::size_t> layer;
  if (!sweep && !a.layer.empty()) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(a.layer, &used);
      if (used != a.layer.size() || v < 1) throw std::invalid_argument(a.layer);
      layer = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      problems.add("--layer: expected a positive integer or 'all', got '" + a.layer + "'");
    }
  }
  if (!a.out.empty()) check_output_parent(a.out, "--out", problems);
  problems.throw_if_any(err);

  apply_backend(c);
  ModelParams<float> params = load_checkpoint_params(*ckpt);
  const ModelConfig& mcfg = params.cfg;
  if (layer && *layer > mcfg.enc_depth) {
    problems.add("--layer: " + std::to_string(*layer) + " outside [1, " + std::to_string(mcfg.enc_depth) + "]");
    problems.throw_if_any(err);
  }
  if (a.untrained) params = initial_params(mcfg, checkpoint_train_seed(*ckpt));

  const auto eval_scenes_all = load_manifest_scenes(*manifest);
  std::vector<ImagePair> train_pairs, eval_pairs;
  if (train_manifest) {
    train_pairs = image_pairs(load_manifest_scenes(*train_manifest));
    eval_pairs = image_pairs(eval_scenes_all);
  } else if (cosine) {
    eval_pairs = image_pairs(eval_scenes_all);
  } else {
    if (eval_scenes_all.size() < 2) {
      problems.add("--data: splitting into probe-train and held-out scenes needs at least 2 scenes; pass --train-data");
      problems.throw_if_any(err);
    }
    const std::size_t half = (eval_scenes_all.size() + 1) / 2;
    train_pairs = image_pairs({eval_scenes_all.begin(), eval_scenes_all.begin() + half});
    eval_pairs = image_pairs({eval_scenes_all.begin() + half, eval_scenes_all.end()});
  }
  if (eval_pairs.empty() || (!cosine && train_pairs.empty())) {
    problems.add("--data: no pairs with ground-truth warps");
    problems.throw_if_any(err);
  }
  const Image& first = eval_pairs.front().source;
  const PatchGrid grid = PatchGrid::for_image(first.height, first.width, mcfg.patch_size);

  if (sweep) {
    std::ostringstream table;
    table << "layer,epe,robustness,n_valid\n";
    for (std::size_t l = 1; l <= mcfg.enc_depth; ++l) {
      const LayerScore s = score_layer(train_pairs, eval_pairs, params, l, cosine, c.probe, grid);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%zu\n", l, s.pooled.epe, s.pooled.robustness, s.pooled.n_valid);
      table << buf;
    }
    if (!a.out.empty()) {
      std::ofstream os(a.out, std::ios::trunc);
      os << table.str();
      if (!os) throw std::runtime_error("cannot write " + a.out);
    }
    out << table.str();
    return kOk;
  }

  const std::size_t l = layer.value_or(mcfg.enc_depth);
  const LayerScore s = score_layer(train_pairs, eval_pairs, params, l, cosine, c.probe, grid);
  if (!a.out.empty()) {
    std::vector<ProbePair> ids;
    for (const auto& p : eval_pairs) ids.push_back({p.pair_id, {}, {}, {}});
    write_probe_csv(a.out, ids, s.per_pair);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "layer %zu %s: epe %.4f robustness %.4f over %zu points, %zu pairs\n", l,
                cosine ? "cosine" : "probe", s.pooled.epe, s.pooled.robustness, s.pooled.n_valid,
                eval_pairs.size());
  out << buf;
  return kOk;
}

// ---------------------------------------------------------------- inspect

struct InspectArgs {
  CommonArgs common;
  std::string checkpoint;
  std::string data;
  std::string out;
  std::size_t scene = 0;
  std::vector<std::size_t> views{0, 1};
  std::vector<std::size_t> query{0, 0, 0};
  std::optional<std::size_t> block;
  bool duplicate = false;
  bool mask_query = false;
};

int cmd_inspect(const InspectArgs& a, std::ostream& out, std::ostream& err) {
  Problems problems;
  RunConfig c = build_config(a.common, problems);
  const auto ckpt = require_checkpoint(a.checkpoint, "--checkpoint", problems);
  const auto manifest = resolve_data(a.data, "--data", problems);
  if (a.out.empty()) problems.add("--out: required");
  else if (fs::exists(a.out) && !fs::is_directory(a.out)) problems.add("--out: " + a.out + " is not a directory");
  if (a.query.size() != 3) problems.add("--query: expected view,row,col");
  if (a.views.empty()) problems.add("--views: at least one view");
  problems.throw_if_any(err);

  apply_backend(c);
  const ModelParams<float> params = load_checkpoint_params(*ckpt);
  const ModelConfig& mcfg = params.cfg;
  const auto schedule = decoder_schedule(mcfg);
  std::size_t block = 0;
  if (a.block) {
    block = *a.block;
    if (block >= schedule.size())
      problems.add("--block: " + std::to_string(block) + " outside the decoder (depth " +
                   std::to_string(schedule.size()) + ")");
    else if (!schedule[block])
      problems.add("--block: " + std::to_string(block) + " is a frame-wise block; choose a global one");
  } else {
    while (block < schedule.size() && !schedule[block]) ++block;
    if (block == schedule.size()) problems.add("--block: the decoder has no global block");
  }

  const auto scenes = load_manifest_scenes(*manifest);
  if (a.scene >= scenes.size())
    problems.add("--scene: " + std::to_string(a.scene) + " outside [0, " + std::to_string(scenes.size()) + ")");
  problems.throw_if_any(err);

  const SceneSequence& seq = scenes[a.scene].sequence;
  std::vector<Image> images;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < a.views.size(); ++i) {
    const std::size_t v = a.duplicate ? a.views.front() : a.views[i];
    if (v >= seq.length())
      problems.add("--views: " + std::to_string(v) + " outside scene of " + std::to_string(seq.length()) + " frames");
    else {
      images.push_back(seq.frames[v].image());
      ids.push_back(seq.frames[v].frame_id());
    }
  }
  if (a.duplicate && images.size() < 2) problems.add("--duplicate: needs at least two --views entries");
  const AttentionQuery q{a.query[0], a.query[1], a.query[2], a.mask_query};
  if (!images.empty()) {
    const PatchGrid grid = PatchGrid::for_image(images[0].height, images[0].width, mcfg.patch_size);
    if (q.view >= images.size() || q.row >= grid.grid_h || q.col >= grid.grid_w)
      problems.add("--query: outside " + std::to_string(images.size()) + " views of " + std::to_string(grid.grid_h) +
                   "x" + std::to_string(grid.grid_w) + " patches");
  }
  problems.throw_if_any(err);

  const PatchGrid grid = PatchGrid::for_image(images[0].height, images[0].width, mcfg.patch_size);
  const fs::path dir = a.out;
  fs::create_directories(dir);

  const AttentionMap map = attention_map<float>(images, q, block, params);
  {
    std::ofstream os(dir / "attention.csv", std::ios::trunc);
    os << "view,row,col,weight,view_weight\n";
    char buf[160];
    for (std::size_t s = 0; s < map.views; ++s)
      for (std::size_t n = 0; n < map.patches; ++n) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.9g,%.9g\n", s, n / grid.grid_w, n % grid.grid_w,
                      map.weights[s * map.patches + n], map.per_view[s * map.patches + n]);
        os << buf;
      }
    if (!os) throw std::runtime_error("cannot write " + (dir / "attention.csv").string());
  }

  // Cosine warps from the query view to every other view, final encoder layer.
  Tensor<float> feats;
  {
    NoGradGuard guard;
    feats = extract_features<float>(images, mcfg.enc_depth, params);
  }
  const std::size_t n = feats.dim(1), w = feats.dim(2);
  const auto vals = feats.values();
  auto view_feats = [&](std::size_t s) {
    return Tensor<double>::from({n, w}, std::vector<double>(vals.begin() + s * n * w, vals.begin() + (s + 1) * n * w));
  };
  std::size_t written = 0;
  for (std::size_t s = 0; s < images.size(); ++s) {
    if (s == q.view) continue;
    const WarpEstimate est = cosine_match(view_feats(q.view), view_feats(s), grid, true);
    const fs::path p = dir / ("warp_" + std::to_string(q.view) + "_" + std::to_string(s) + ".mumw");
    write_warp(p, to_ground_truth_layout(est, ids[q.view], ids[s]));
    ++written;
  }
  out << "attention at decoder block " << block << " for query (view " << q.view << ", row " << q.row << ", col "
      << q.col << "): " << (dir / "attention.csv").string() << "; " << written << " warp estimates\n";
  return kOk;
}

// ---------------------------------------------------------------- config

int cmd_config(const CommonArgs& a, bool dump, std::ostream& out, std::ostream& err) {
  Problems problems;
  const RunConfig c = build_config(a, problems);
  problems.add_all(c.problems());
  problems.throw_if_any(err);
  if (dump) out << to_json(c).dump(2) << "\n";
  else out << "config ok\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view masked image modeling: data, pretraining, probing and inspection", "mum"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic multi-view dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory (default: $MUM_DATA_DIR)");
  gen_cmd->add_option("--scenes", gen.scenes, "Number of scenes")->capture_default_str();
  gen_cmd->add_option("--views", gen.views, "Frames per scene")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "Square image size in pixels")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  gen_cmd->add_flag("--no-warps", gen.no_warps, "Skip ground-truth warps");

  PretrainArgs pre;
  auto* pre_cmd = app.add_subcommand("pretrain", "Run masked multi-view pretraining");
  add_common(pre_cmd, pre.common);
  pre_cmd->add_option("--data", pre.data, "Manifest or dataset directory (default: $MUM_DATA_DIR)");
  pre_cmd->add_option("--out", pre.out, "Run directory: config.json, metrics.csv, checkpoints/");
  pre_cmd->add_option("--steps", pre.steps, "Total optimizer steps");
  pre_cmd->add_option("--warmup", pre.warmup, "Warmup steps");
  pre_cmd->add_option("--lr", pre.lr, "Base learning rate (scaled by batch / 256)");
  pre_cmd->add_option("--log-interval", pre.log_interval, "Steps per metrics row");
  pre_cmd->add_option("--checkpoint-interval", pre.checkpoint_interval, "Steps between checkpoints (0: final only)");
  pre_cmd->add_option("--stop-after", pre.stop_after, "Stop after this many completed steps");
  pre_cmd->add_option("--resume", pre.resume, "Checkpoint, checkpoint root or run directory to resume from");
  pre_cmd->add_option("--ablate", pre.ablate,
                      "key=value: reference_view=on|off, mask_ratio=R, comm_site=decoder|encoder, "
                      "pos_mode=rope|absolute, target=normalized|raw");
  pre_cmd->add_flag("--quiet", pre.quiet, "No per-interval progress lines");

  ProbeArgs probe;
  auto* probe_cmd = app.add_subcommand("probe", "Evaluate frozen features by dense matching");
  add_common(probe_cmd, probe.common);
  probe_cmd->add_option("--checkpoint", probe.checkpoint, "Checkpoint, checkpoint root or run directory");
  probe_cmd->add_option("--data", probe.data, "Held-out pairs (default: $MUM_DATA_DIR)");
  probe_cmd->add_option("--train-data", probe.train_data,
                        "Probe training pairs (default: first half of --data scenes, the rest held out)");
  probe_cmd->add_option("--layer", probe.layer, "Encoder layer, 1-based (default: last), or 'all' for a sweep");
  probe_cmd->add_option("--mode", probe.mode, "probe or cosine")->capture_default_str();
  probe_cmd->add_option("--out", probe.out, "CSV: per-pair rows, or the layer table with --layer all");
  probe_cmd->add_option("--probe-steps", probe.probe_steps, "Probe training steps");
  probe_cmd->add_option("--probe-lr", probe.probe_lr, "Probe learning rate");
  probe_cmd->add_flag("--untrained", probe.untrained, "Use the checkpoint's initial (step 0) parameters");

  InspectArgs insp;
  auto* insp_cmd = app.add_subcommand("inspect", "Export decoder attention and warp estimates");
  add_common(insp_cmd, insp.common);
  insp_cmd->add_option("--checkpoint", insp.checkpoint, "Checkpoint, checkpoint root or run directory");
  insp_cmd->add_option("--data", insp.data, "Manifest or dataset directory (default: $MUM_DATA_DIR)");
  insp_cmd->add_option("--out", insp.out, "Output directory");
  insp_cmd->add_option("--scene", insp.scene, "Scene index")->capture_default_str();
  insp_cmd->add_option("--views", insp.views, "Frame indices within the scene")->delimiter(',');
  insp_cmd->add_option("--query", insp.query, "view,row,col of the query patch")->delimiter(',');
  insp_cmd->add_option("--block", insp.block, "Decoder block, 0-based (default: first global block)");
  insp_cmd->add_flag("--duplicate", insp.duplicate, "Feed the first listed view in every slot");
  insp_cmd->add_flag("--mask-query", insp.mask_query, "Replace the query patch by the mask token");

  CommonArgs cfg;
  bool dump = false;
  auto* cfg_cmd = app.add_subcommand("config", "Validate or print the effective configuration");
  add_common(cfg_cmd, cfg);
  cfg_cmd->add_flag("--dump", dump, "Print the effective configuration as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out, err);
    if (*pre_cmd) return cmd_pretrain(pre, out, err);
    if (*probe_cmd) return cmd_probe(probe, out, err);
    if (*insp_cmd) return cmd_inspect(insp, out, err);
    if (*cfg_cmd) return cmd_config(cfg, dump, out, err);
  } catch (const Invalid&) {
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kConfigError;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace mum::cli

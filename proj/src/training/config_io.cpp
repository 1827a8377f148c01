// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/config_io.hpp"

#include <functional>
#include <map>

namespace mum {

using nlohmann::json;
using nlohmann::ordered_json;
using config_detail::get;

namespace {

using Handler = std::function<void(const json&)>;

void dispatch(const json& j, const std::string& where, const std::map<std::string, Handler>& fields,
              std::vector<std::string>& problems) {
  if (!j.is_object()) {
    problems.push_back(where + ": expected an object");
    return;
  }
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end())
      problems.push_back(where + "." + key + ": unknown key");
    else
      it->second(value);
  }
}

// Non-negative integers arrive as JSON numbers; reject negatives explicitly
// since the target fields are unsigned.
template <typename U>
Handler unsigned_field(const std::string& where, const std::string& key, U& out, std::vector<std::string>& problems) {
  return [&, where, key](const json& v) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
      problems.push_back(where + "." + key + ": expected a non-negative integer, got " + v.dump());
      return;
    }
    out = v.get<U>();
  };
}

template <typename V>
Handler field(const std::string& where, const std::string& key, V& out, std::vector<std::string>& problems) {
  return [&, where, key](const json& v) {
    if constexpr (std::is_floating_point_v<V>) {
      if (!v.is_number()) {
        problems.push_back(where + "." + key + ": expected a number, got " + v.dump());
        return;
      }
    }
    get(v, where, key, out, problems);
  };
}

}  // namespace

ordered_json to_json(const ModelConfig& c) {
  ordered_json j;
  j["enc_width"] = c.enc_width;
  j["enc_depth"] = c.enc_depth;
  j["enc_heads"] = c.enc_heads;
  j["dec_width"] = c.dec_width;
  j["dec_depth"] = c.dec_depth;
  j["dec_heads"] = c.dec_heads;
  j["patch_size"] = c.patch_size;
  j["pos_mode"] = to_string(c.pos_mode);
  j["comm_site"] = to_string(c.comm_site);
  j["rope_base"] = c.rope_base;
  j["mlp_ratio"] = c.mlp_ratio;
  j["head_bias"] = c.head_bias;
  j["max_grid"] = c.max_grid;
  return j;
}

void read_json(const json& j, ModelConfig& c, std::vector<std::string>& problems, const std::string& w) {
  auto& p = problems;
  std::map<std::string, Handler> f{
      {"enc_width", unsigned_field(w, "enc_width", c.enc_width, p)},
      {"enc_depth", unsigned_field(w, "enc_depth", c.enc_depth, p)},
      {"enc_heads", unsigned_field(w, "enc_heads", c.enc_heads, p)},
      {"dec_width", unsigned_field(w, "dec_width", c.dec_width, p)},
      {"dec_depth", unsigned_field(w, "dec_depth", c.dec_depth, p)},
      {"dec_heads", unsigned_field(w, "dec_heads", c.dec_heads, p)},
      {"patch_size", unsigned_field(w, "patch_size", c.patch_size, p)},
      {"pos_mode",
       [&](const json& v) {
         std::string s;
         get(v, w, "pos_mode", s, p);
         if (s == "rope" || s == "absolute")
           c.pos_mode = parse_pos_mode(s);
         else if (v.is_string())
           p.push_back(w + ".pos_mode: must be 'rope' or 'absolute', got '" + s + "'");
       }},
      {"comm_site",
       [&](const json& v) {
         std::string s;
         get(v, w, "comm_site", s, p);
         if (s == "decoder" || s == "encoder")
           c.comm_site = parse_comm_site(s);
         else if (v.is_string())
           p.push_back(w + ".comm_site: must be 'decoder' or 'encoder', got '" + s + "'");
       }},
      {"rope_base", field(w, "rope_base", c.rope_base, p)},
      {"mlp_ratio", field(w, "mlp_ratio", c.mlp_ratio, p)},
      {"head_bias", field(w, "head_bias", c.head_bias, p)},
      {"max_grid", unsigned_field(w, "max_grid", c.max_grid, p)},
  };
  dispatch(j, w, f, p);
}

ordered_json to_json(const TrainConfig& c) {
  ordered_json j;
  j["base_lr"] = c.base_lr;
  j["batch_size_for_scaling"] = c.batch_size_for_scaling;
  j["warmup_steps"] = c.warmup_steps;
  j["total_steps"] = c.total_steps;
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["min_lr"] = c.min_lr;
  j["grad_clip"] = c.grad_clip ? ordered_json(*c.grad_clip) : ordered_json(nullptr);
  j["seed"] = c.seed;
  j["mask_ratio"] = c.mask_ratio;
  j["normalize_target"] = c.normalize_target;
  j["reference_view"] = c.reference_view;
  j["log_interval"] = c.log_interval;
  j["checkpoint_interval"] = c.checkpoint_interval;
  return j;
}

void read_json(const json& j, TrainConfig& c, std::vector<std::string>& problems, const std::string& w) {
  auto& p = problems;
  std::map<std::string, Handler> f{
      {"base_lr", field(w, "base_lr", c.base_lr, p)},
      {"batch_size_for_scaling", unsigned_field(w, "batch_size_for_scaling", c.batch_size_for_scaling, p)},
      {"warmup_steps", unsigned_field(w, "warmup_steps", c.warmup_steps, p)},
      {"total_steps", unsigned_field(w, "total_steps", c.total_steps, p)},
      {"weight_decay", field(w, "weight_decay", c.weight_decay, p)},
      {"beta1", field(w, "beta1", c.beta1, p)},
      {"beta2", field(w, "beta2", c.beta2, p)},
      {"adam_eps", field(w, "adam_eps", c.adam_eps, p)},
      {"min_lr", field(w, "min_lr", c.min_lr, p)},
      {"grad_clip",
       [&](const json& v) {
         if (v.is_null()) {
           c.grad_clip.reset();
         } else if (v.is_number()) {
           c.grad_clip = v.get<double>();
         } else {
           p.push_back(w + ".grad_clip: expected a number or null, got " + v.dump());
         }
       }},
      {"seed", unsigned_field(w, "seed", c.seed, p)},
      {"mask_ratio", field(w, "mask_ratio", c.mask_ratio, p)},
      {"normalize_target", field(w, "normalize_target", c.normalize_target, p)},
      {"reference_view", field(w, "reference_view", c.reference_view, p)},
      {"log_interval", unsigned_field(w, "log_interval", c.log_interval, p)},
      {"checkpoint_interval", unsigned_field(w, "checkpoint_interval", c.checkpoint_interval, p)},
  };
  dispatch(j, w, f, p);
}

ordered_json to_json(const SamplerConfig& c) {
  ordered_json j;
  j["min_len"] = c.min_len;
  j["max_len"] = c.max_len;
  j["frames_per_device"] = c.frames_per_device;
  j["single_view_prob"] = c.single_view_prob;
  j["image_size"] = c.image_size;
  j["flip_prob"] = c.flip_prob;
  j["rng_seed"] = c.rng_seed;
  j["max_retries"] = c.max_retries;
  return j;
}

void read_json(const json& j, SamplerConfig& c, std::vector<std::string>& problems, const std::string& w) {
  auto& p = problems;
  std::map<std::string, Handler> f{
      {"min_len", unsigned_field(w, "min_len", c.min_len, p)},
      {"max_len", unsigned_field(w, "max_len", c.max_len, p)},
      {"frames_per_device", unsigned_field(w, "frames_per_device", c.frames_per_device, p)},
      {"single_view_prob", field(w, "single_view_prob", c.single_view_prob, p)},
      {"image_size", unsigned_field(w, "image_size", c.image_size, p)},
      {"flip_prob", field(w, "flip_prob", c.flip_prob, p)},
      {"rng_seed", unsigned_field(w, "rng_seed", c.rng_seed, p)},
      {"max_retries", unsigned_field(w, "max_retries", c.max_retries, p)},
  };
  dispatch(j, w, f, p);
}

ordered_json to_json(const ProbeConfig& c) {
  ordered_json j;
  j["temperature"] = c.temperature;
  j["train_steps"] = c.train_steps;
  j["probe_lr"] = c.probe_lr;
  j["weight_decay"] = c.weight_decay;
  j["eval_interval"] = c.eval_interval;
  j["batch_pairs"] = c.batch_pairs;
  j["seed"] = c.seed;
  j["eval_mode"] = c.eval_mode == MatchMode::soft ? "soft" : "hard";
  return j;
}

void read_json(const json& j, ProbeConfig& c, std::vector<std::string>& problems, const std::string& w) {
  auto& p = problems;
  std::map<std::string, Handler> f{
      {"temperature", field(w, "temperature", c.temperature, p)},
      {"train_steps", unsigned_field(w, "train_steps", c.train_steps, p)},
      {"probe_lr", field(w, "probe_lr", c.probe_lr, p)},
      {"weight_decay", field(w, "weight_decay", c.weight_decay, p)},
      {"eval_interval", unsigned_field(w, "eval_interval", c.eval_interval, p)},
      {"batch_pairs", unsigned_field(w, "batch_pairs", c.batch_pairs, p)},
      {"seed", unsigned_field(w, "seed", c.seed, p)},
      {"eval_mode",
       [&](const json& v) {
         if (v == "soft")
           c.eval_mode = MatchMode::soft;
         else if (v == "hard")
           c.eval_mode = MatchMode::hard;
         else
           p.push_back(w + ".eval_mode: must be 'soft' or 'hard', got " + v.dump());
       }},
  };
  dispatch(j, w, f, p);
}

void RunConfig::apply_seed() {
  train.seed = seed;
  sampler.rng_seed = seed;
  probe.seed = seed;
}

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> out;
  auto append = [&](std::vector<std::string> p) { out.insert(out.end(), p.begin(), p.end()); };
  append(model.problems());
  append(train.problems());
  append(sampler.problems());
  append(probe.problems());
  if (model.patch_size > 0 && sampler.image_size % model.patch_size != 0)
    out.push_back("sampler.image_size must be a multiple of model.patch_size");
  return out;
}

RunConfig full_preset() {
  RunConfig c;
  c.model.enc_width = 1024;
  c.model.enc_depth = 24;
  c.model.enc_heads = 16;
  c.model.dec_width = 768;
  c.model.dec_depth = 12;
  c.model.dec_heads = 12;
  c.model.patch_size = 16;
  c.train.batch_size_for_scaling = 6144;
  c.apply_seed();
  return c;
}

RunConfig desk_preset() {
  RunConfig c;
  c.model.enc_width = 32;
  c.model.enc_depth = 2;
  c.model.enc_heads = 2;
  c.model.dec_width = 32;
  c.model.dec_depth = 2;
  c.model.dec_heads = 2;
  c.model.patch_size = 8;
  c.train.base_lr = 3e-3;
  c.train.batch_size_for_scaling = 256;
  c.train.warmup_steps = 50;
  c.train.total_steps = 500;
  c.train.log_interval = 10;
  c.train.checkpoint_interval = 100;
  c.sampler.min_len = 2;
  c.sampler.max_len = 6;
  c.sampler.frames_per_device = 24;
  c.sampler.image_size = 64;
  c.apply_seed();
  return c;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["deterministic"] = c.deterministic;
  j["model"] = to_json(c.model);
  j["train"] = to_json(c.train);
  j["sampler"] = to_json(c.sampler);
  j["probe"] = to_json(c.probe);
  return j;
}

void read_json(const json& j, RunConfig& c, std::vector<std::string>& problems) {
  auto& p = problems;
  bool seeded = false;
  std::map<std::string, Handler> f{
      {"seed",
       [&](const json& v) {
         unsigned_field("config", "seed", c.seed, p)(v);
         seeded = true;
       }},
      {"deterministic", field("config", "deterministic", c.deterministic, p)},
      {"model", [&](const json& v) { read_json(v, c.model, p); }},
      {"train", [&](const json& v) { read_json(v, c.train, p); }},
      {"sampler", [&](const json& v) { read_json(v, c.sampler, p); }},
      {"probe", [&](const json& v) { read_json(v, c.probe, p); }},
  };
  dispatch(j, "config", f, p);
  // A top-level seed feeds every component unless a section names its own.
  if (seeded) {
    if (!(j.contains("train") && j["train"].is_object() && j["train"].contains("seed"))) c.train.seed = c.seed;
    if (!(j.contains("sampler") && j["sampler"].is_object() && j["sampler"].contains("rng_seed"))) c.sampler.rng_seed = c.seed;
    if (!(j.contains("probe") && j["probe"].is_object() && j["probe"].contains("seed"))) c.probe.seed = c.seed;
  }
}

}  // namespace mum

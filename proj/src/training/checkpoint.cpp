// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <map>

#include "mum/binary_io.hpp"
#include "mum/config_io.hpp"
#include "mum/errors.hpp"
#include "mum/training.hpp"

namespace mum {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "mum-checkpoint";
constexpr int kVersion = 1;

void write_blob(const fs::path& path, std::span<const float> values) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  binary::write_f32(os, values);
  if (!os) throw TrainingError("cannot write " + path.string());
}

std::vector<float> read_blob(const fs::path& path, std::size_t count) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TrainingError("checkpoint blob missing: " + path.string());
  is.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(is.tellg());
  if (bytes != count * sizeof(float))
    throw TrainingError("checkpoint blob " + path.string() + " holds " + std::to_string(bytes) + " bytes, expected " +
                        std::to_string(count * sizeof(float)));
  is.seekg(0);
  return binary::read_f32(is, count);
}

json read_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw TrainingError("no checkpoint at " + dir.string() + " (manifest.json missing)");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw TrainingError("checkpoint manifest " + (dir / "manifest.json").string() + ": " + e.what());
  }
  if (j.value("format", "") != kFormat || j.value("version", 0) != kVersion)
    throw TrainingError("unsupported checkpoint format in " + dir.string());
  return j;
}

ModelParams<float> params_from(const fs::path& dir, const json& j) {
  ModelConfig cfg;
  std::vector<std::string> problems;
  read_json(j.at("model_config"), cfg, problems);
  for (auto& p : cfg.problems()) problems.push_back(p);
  if (!problems.empty()) throw TrainingError("checkpoint model config invalid: " + problems.front());
  Rng unused(0);
  ModelParams<float> params = init_params<float>(cfg, unused);
  std::map<std::string, json> entries;
  for (const auto& e : j.at("parameters")) entries[e.at("name").get<std::string>()] = e;
  for (const auto& p : params.named()) {
    const auto it = entries.find(p.name);
    if (it == entries.end()) throw TrainingError("checkpoint lacks parameter '" + p.name + "'");
    if (it->second.at("shape").get<Shape>() != p.tensor.shape())
      throw TrainingError("checkpoint parameter '" + p.name + "' has shape " +
                          shape_str(it->second.at("shape").get<Shape>()) + ", expected " + shape_str(p.tensor.shape()));
    const auto values = read_blob(dir / it->second.at("file").get<std::string>(), p.tensor.numel());
    Tensor<float> handle = p.tensor;
    std::copy(values.begin(), values.end(), handle.mutable_values().begin());
  }
  if (entries.size() != params.named().size()) throw TrainingError("checkpoint holds unexpected parameters");
  return params;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const TrainState& state, const TrainConfig& train_cfg,
                     const SamplerConfig& sampler_cfg) {
  // Written beside the target and renamed, so an interrupted save never
  // leaves a half-written checkpoint under the final name.
  const fs::path tmp = dir.string() + ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp / "params");
  fs::create_directories(tmp / "optimizer");

  const auto named = state.params.named();
  ordered_json params = ordered_json::array();
  ordered_json moments = ordered_json::array();
  const bool has_moments = state.optimizer.m.size() == named.size();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& p = named[i];
    const std::string file = "params/" + p.name + ".f32";
    write_blob(tmp / file, p.tensor.values());
    params.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"file", file}, {"decay", p.decay}});
    if (has_moments) {
      const std::string mf = "optimizer/" + p.name + ".m.f32";
      const std::string vf = "optimizer/" + p.name + ".v.f32";
      write_blob(tmp / mf, state.optimizer.m[i]);
      write_blob(tmp / vf, state.optimizer.v[i]);
      moments.push_back({{"name", p.name}, {"m_file", mf}, {"v_file", vf}});
    }
  }
  ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["dtype"] = "float32";
  j["byte_order"] = "little";
  j["step"] = state.step;
  j["model_config"] = to_json(state.params.cfg);
  j["train_config"] = to_json(train_cfg);
  j["sampler_config"] = to_json(sampler_cfg);
  j["parameters"] = params;
  j["optimizer"] = {{"step", state.optimizer.step}, {"moments", moments}};
  {
    std::ofstream os(tmp / "manifest.json", std::ios::trunc);
    os << j.dump(2) << "\n";
    if (!os) throw TrainingError("cannot write " + (tmp / "manifest.json").string());
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

TrainState load_checkpoint(const fs::path& dir) {
  const json j = read_manifest(dir);
  TrainState st;
  st.params = params_from(dir, j);
  st.step = j.at("step").get<std::uint64_t>();
  const auto named = st.params.named();
  st.optimizer = OptimizerState<float>::for_params(named);
  const json& opt = j.at("optimizer");
  st.optimizer.step = opt.at("step").get<std::uint64_t>();
  std::map<std::string, json> entries;
  for (const auto& e : opt.at("moments")) entries[e.at("name").get<std::string>()] = e;
  if (entries.empty() && st.optimizer.step == 0) return st;
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto it = entries.find(named[i].name);
    if (it == entries.end()) throw TrainingError("checkpoint lacks optimizer state for '" + named[i].name + "'");
    const std::size_t n = named[i].tensor.numel();
    st.optimizer.m[i] = read_blob(dir / it->second.at("m_file").get<std::string>(), n);
    st.optimizer.v[i] = read_blob(dir / it->second.at("v_file").get<std::string>(), n);
  }
  return st;
}

ModelParams<float> load_checkpoint_params(const fs::path& dir) { return params_from(dir, read_manifest(dir)); }

}  // namespace mum

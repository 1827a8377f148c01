// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mum/model.hpp"
#include "mum/probe.hpp"
#include "mum/sampler.hpp"
#include "mum/training.hpp"

// JSON (de)serialization of configuration structs. Readers overlay the keys
// present in the object onto the given struct and append one message per
// unknown key or ill-typed value instead of stopping at the first problem.

namespace mum {

nlohmann::ordered_json to_json(const ModelConfig& c);
nlohmann::ordered_json to_json(const TrainConfig& c);
nlohmann::ordered_json to_json(const SamplerConfig& c);
nlohmann::ordered_json to_json(const ProbeConfig& c);

void read_json(const nlohmann::json& j, ModelConfig& c, std::vector<std::string>& problems,
               const std::string& where = "model");
void read_json(const nlohmann::json& j, TrainConfig& c, std::vector<std::string>& problems,
               const std::string& where = "train");
void read_json(const nlohmann::json& j, SamplerConfig& c, std::vector<std::string>& problems,
               const std::string& where = "sampler");
void read_json(const nlohmann::json& j, ProbeConfig& c, std::vector<std::string>& problems,
               const std::string& where = "probe");

/// Every configurable part of a command-line run.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SamplerConfig sampler;
  ProbeConfig probe;
  std::uint64_t seed = 0;  // copied into train, sampler and probe seeds
  bool deterministic = false;

  /// Seeds the component configs from `seed`.
  void apply_seed();
  /// Problems of every section, prefixed by section name.
  std::vector<std::string> problems() const;
};

/// Full-scale widths, depths and schedule.
RunConfig full_preset();
/// Scaled down to run on one CPU core in minutes.
RunConfig desk_preset();

nlohmann::ordered_json to_json(const RunConfig& c);
void read_json(const nlohmann::json& j, RunConfig& c, std::vector<std::string>& problems);

namespace config_detail {

/// Reads j into `out`, recording a message naming `key` on type mismatch.
template <typename V>
void get(const nlohmann::json& j, const std::string& where, const std::string& key, V& out,
         std::vector<std::string>& problems) {
  try {
    out = j.get<V>();
  } catch (const nlohmann::json::exception&) {
    problems.push_back(where + "." + key + ": expected " + std::string(std::is_same_v<V, bool> ? "a boolean"
                                                                     : std::is_integral_v<V> ? "an integer"
                                                                     : std::is_floating_point_v<V> ? "a number"
                                                                                                   : "a string") +
                       ", got " + j.dump());
  }
}

}  // namespace config_detail

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "mum/errors.hpp"
#include "mum/rng.hpp"

namespace mum {

namespace fs = std::filesystem;

std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t index) {
  Rng rng = derive_rng(dataset_seed, {0x7363656e65ULL, index});
  return rng();
}

fs::path write_synthetic_dataset(const fs::path& out, const DatasetSpec& spec) {
  if (spec.scenes == 0 || spec.views == 0) throw ConfigError("dataset needs at least one scene and one view");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot create " + out.string() + ": " + ec.message());
  nlohmann::ordered_json manifest;
  manifest["scenes"] = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < spec.scenes; ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03zu", s);
    const SyntheticScene scene =
        generate_synthetic_scene(scene_seed(spec.seed, s), spec.views, spec.size, spec.size, name, spec.ranges);
    fs::create_directories(out / name);
    nlohmann::ordered_json js;
    js["scene_id"] = name;
    js["frames"] = nlohmann::ordered_json::array();
    for (std::size_t v = 0; v < spec.views; ++v) {
      const std::string rel = std::string(name) + "/" + std::to_string(v) + ".mumf";
      write_mumf(out / rel, scene.sequence.frames[v].image());
      js["frames"].push_back({{"frame_id", scene.sequence.frames[v].frame_id()}, {"path", rel}, {"order_index", v}});
    }
    if (spec.warps && spec.views > 1) {
      js["warps"] = nlohmann::ordered_json::array();
      for (std::size_t a = 0; a < spec.views; ++a)
        for (std::size_t b = 0; b < spec.views; ++b) {
          if (a == b) continue;
          const std::string rel =
              std::string(name) + "/warp_" + std::to_string(a) + "_" + std::to_string(b) + ".mumw";
          const GroundTruthWarp& w = scene.warp(a, b);
          write_warp(out / rel, w);
          js["warps"].push_back({{"source_id", w.source_id}, {"target_id", w.target_id}, {"path", rel}});
        }
    }
    manifest["scenes"].push_back(js);
  }
  const fs::path path = out / "manifest.json";
  std::ofstream os(path, std::ios::trunc);
  os << manifest.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return path;
}

TrainingData training_data(const std::vector<ManifestScene>& scenes) {
  TrainingData d;
  WeightedPool pool;
  for (const auto& s : scenes) {
    if (s.sequence.length() >= 2) pool.sequences.push_back(s.sequence);
    for (const auto& f : s.sequence.frames) d.single_view_pool.push_back(f);
  }
  d.pools.push_back(std::move(pool));
  return d;
}

std::vector<ImagePair> image_pairs(const std::vector<ManifestScene>& scenes) {
  std::vector<ImagePair> out;
  for (const auto& s : scenes) {
    for (const auto& w : s.warps) {
      const FrameRecord* src = nullptr;
      const FrameRecord* tgt = nullptr;
      for (const auto& f : s.sequence.frames) {
        if (f.frame_id() == w.source_id) src = &f;
        if (f.frame_id() == w.target_id) tgt = &f;
      }
      if (!src || !tgt)
        throw ManifestError("warp " + w.path.string() + " names frames missing from scene '" + s.sequence.scene_id + "'");
      GroundTruthWarp gt = read_warp(w.path);
      gt.source_id = w.source_id;
      gt.target_id = w.target_id;
      if (gt.height != src->image().height || gt.width != src->image().width)
        throw ManifestError("warp " + w.path.string() + " does not match the size of frame '" + w.source_id + "'");
      out.push_back({w.source_id + "->" + w.target_id, src->image(), tgt->image(), std::move(gt)});
    }
  }
  return out;
}

std::vector<ProbePair> probe_pairs(std::span<const ImagePair> pairs, const ModelParams<float>& params,
                                   std::size_t layer) {
  std::vector<ProbePair> out;
  NoGradGuard guard;
  for (const auto& p : pairs) {
    const std::vector<Image> images{p.source, p.target};
    const Tensor<float> f = extract_features<float>(images, layer, params);
    const std::size_t n = f.dim(1), w = f.dim(2);
    const auto v = f.values();
    out.push_back({p.pair_id, Tensor<double>::from({n, w}, std::vector<double>(v.begin(), v.begin() + n * w)),
                   Tensor<double>::from({n, w}, std::vector<double>(v.begin() + n * w, v.end())), p.gt});
  }
  return out;
}

}  // namespace mum

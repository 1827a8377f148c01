// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/scene_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>

#include "json.hpp"
#include "mum/binary_io.hpp"
#include "mum/rng.hpp"

namespace mum {

struct FrameRecord::Pixels {
  std::filesystem::path path;
  std::mutex mutex;
  std::shared_ptr<const Image> image;
};

FrameRecord FrameRecord::in_memory(std::string frame_id, std::string scene_id, std::size_t order_index,
                                   Image image) {
  FrameRecord f;
  f.frame_id_ = std::move(frame_id);
  f.scene_id_ = std::move(scene_id);
  f.order_index_ = order_index;
  f.pixels_ = std::make_shared<Pixels>();
  f.pixels_->image = std::make_shared<const Image>(std::move(image));
  return f;
}

FrameRecord FrameRecord::from_file(std::string frame_id, std::string scene_id, std::size_t order_index,
                                   std::filesystem::path path) {
  FrameRecord f;
  f.frame_id_ = std::move(frame_id);
  f.scene_id_ = std::move(scene_id);
  f.order_index_ = order_index;
  f.pixels_ = std::make_shared<Pixels>();
  f.pixels_->path = std::move(path);
  return f;
}

const std::filesystem::path& FrameRecord::path() const {
  static const std::filesystem::path kEmpty;
  return pixels_ ? pixels_->path : kEmpty;
}

const Image& FrameRecord::image() const {
  if (!pixels_) throw IngestionError(frame_id_, "frame has no pixel source");
  std::lock_guard lock(pixels_->mutex);
  if (!pixels_->image) {
    Image img;
    try {
      img = read_image(pixels_->path);
    } catch (const std::exception& e) {
      throw IngestionError(frame_id_, e.what());
    }
    if (img.channels != 3)
      throw IngestionError(frame_id_, "expected 3 channels, got " + std::to_string(img.channels));
    for (float v : img.data)
      if (!(v >= 0.0f && v <= 1.0f)) throw IngestionError(frame_id_, "pixel value outside [0, 1]");
    pixels_->image = std::make_shared<const Image>(std::move(img));
  }
  return *pixels_->image;
}

void SceneSequence::validate() const {
  if (frames.empty()) throw ContractError("sequence '" + scene_id + "' is empty");
  for (const auto& f : frames)
    if (f.scene_id() != scene_id)
      throw ContractError("frame '" + f.frame_id() + "' belongs to scene '" + f.scene_id() +
                          "', not '" + scene_id + "'");
}

void OverlapMatrix::validate() const {
  const std::size_t f = size();
  if (scores.size() != f * f)
    throw ContractError("overlap matrix holds " + std::to_string(scores.size()) + " scores for " +
                        std::to_string(f) + " frames");
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t j = 0; j < f; ++j) {
      if (i == j) continue;
      const double s = score(i, j);
      if (!(s >= 0.0)) throw ContractError("overlap scores must be non-negative");
      if (s != score(j, i)) throw ContractError("overlap matrix is not symmetric");
    }
}

void write_warp(const std::filesystem::path& path, const GroundTruthWarp& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("MUMW", 4);
  binary::write_u32(os, static_cast<std::uint32_t>(w.height));
  binary::write_u32(os, static_cast<std::uint32_t>(w.width));
  binary::write_u32(os, 2);
  std::vector<float> coords(w.warp.begin(), w.warp.end());
  binary::write_f32(os, coords);
  os.write(reinterpret_cast<const char*>(w.valid.data()), static_cast<std::streamsize>(w.valid.size()));
  if (!os) throw std::runtime_error("short write to " + path.string());
}

GroundTruthWarp read_warp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "MUMW", 4) != 0)
    throw std::runtime_error(path.string() + ": bad magic, expected MUMW");
  GroundTruthWarp w;
  w.height = binary::read_u32(is);
  w.width = binary::read_u32(is);
  if (binary::read_u32(is) != 2) throw std::runtime_error(path.string() + ": expected 2 coordinate channels");
  const auto coords = binary::read_f32(is, w.height * w.width * 2);
  w.warp.assign(coords.begin(), coords.end());
  w.valid.resize(w.height * w.width);
  if (!is.read(reinterpret_cast<char*>(w.valid.data()), static_cast<std::streamsize>(w.valid.size())))
    throw std::runtime_error(path.string() + ": truncated validity mask");
  return w;
}

GroundTruthWarp flip_warp(const GroundTruthWarp& gt, bool flip_source, bool flip_target,
                          std::size_t target_width) {
  GroundTruthWarp out = gt;
  for (std::size_t y = 0; y < gt.height; ++y)
    for (std::size_t x = 0; x < gt.width; ++x) {
      const std::size_t sx = flip_source ? gt.width - 1 - x : x;
      double tx = gt.x(y, sx);
      if (flip_target) tx = static_cast<double>(target_width - 1) - tx;
      out.warp[(y * gt.width + x) * 2] = tx;
      out.warp[(y * gt.width + x) * 2 + 1] = gt.y(y, sx);
      out.valid[y * gt.width + x] = gt.valid[y * gt.width + sx];
    }
  return out;
}

std::vector<SceneSequence> build_sequences_chunked(const std::vector<FrameRecord>& frames,
                                                   std::size_t chunk_size) {
  if (chunk_size == 0) throw ContractError("chunk_size must be positive");
  std::vector<SceneSequence> out;
  if (frames.empty()) return out;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].order_index() < frames[i - 1].order_index())
      throw ContractError("frames must be sorted by order_index");
    if (frames[i].scene_id() != frames[0].scene_id())
      throw ContractError("chunking expects frames of a single scene");
  }
  for (std::size_t start = 0; start < frames.size(); start += chunk_size) {
    const std::size_t end = std::min(start + chunk_size, frames.size());
    if (end - start < 2) continue;
    SceneSequence seq;
    seq.scene_id = frames[0].scene_id();
    seq.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(start),
                      frames.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<std::size_t> chain_from_anchor(const OverlapMatrix& overlap, std::size_t anchor) {
  const std::size_t f = overlap.size();
  if (anchor >= f) throw ContractError("anchor index out of range");
  std::vector<bool> used(f, false);
  std::vector<std::size_t> chain{anchor};
  used[anchor] = true;
  for (;;) {
    const std::size_t cur = chain.back();
    std::size_t best = f;
    double best_score = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      if (used[j]) continue;
      const double s = overlap.score(cur, j);
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    if (best == f) break;
    used[best] = true;
    chain.push_back(best);
  }
  return chain;
}

std::vector<std::vector<std::string>> build_sequences_chained(const OverlapMatrix& overlap,
                                                              std::size_t num_sequences,
                                                              std::size_t min_len,
                                                              std::uint64_t rng_seed) {
  overlap.validate();
  std::vector<std::vector<std::string>> out;
  if (overlap.size() == 0) return out;
  Rng rng = derive_rng(rng_seed, {0x636861696eULL});
  std::uniform_int_distribution<std::size_t> pick(0, overlap.size() - 1);
  for (std::size_t s = 0; s < num_sequences; ++s) {
    const auto chain = chain_from_anchor(overlap, pick(rng));
    if (chain.size() < min_len) continue;
    std::vector<std::string> ids;
    ids.reserve(chain.size());
    for (std::size_t i : chain) ids.push_back(overlap.frame_ids[i]);
    out.push_back(std::move(ids));
  }
  return out;
}

namespace {

using nlohmann::json;

const json& require_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ManifestError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ManifestError(where + "." + key + ": missing field");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_string()) throw ManifestError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

}  // namespace

std::vector<ManifestScene> load_manifest_scenes(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ManifestError("cannot open manifest " + path.string());
  const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return {};
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ManifestError(path.string() + ": " + e.what());
  }
  const std::filesystem::path root = path.parent_path();
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : root / fp;
  };
  const json& scenes = require_field(doc, "scenes", "manifest");
  if (!scenes.is_array()) throw ManifestError("manifest.scenes: expected an array");

  std::vector<ManifestScene> out;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const std::string where = "scenes[" + std::to_string(si) + "]";
    ManifestScene scene;
    scene.sequence.scene_id = require_string(scenes[si], "scene_id", where);
    const json& frames = require_field(scenes[si], "frames", where);
    if (!frames.is_array()) throw ManifestError(where + ".frames: expected an array");
    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
      const std::string fw = where + ".frames[" + std::to_string(fi) + "]";
      const std::string frame_id = require_string(frames[fi], "frame_id", fw);
      const std::string rel = require_string(frames[fi], "path", fw);
      const json& order = require_field(frames[fi], "order_index", fw);
      if (!order.is_number_integer() || order.get<long long>() < 0)
        throw ManifestError(fw + ".order_index: expected a non-negative integer");
      const auto file = resolve(rel);
      if (!std::filesystem::is_regular_file(file))
        throw IngestionError(frame_id, "image file not found: " + file.string());
      scene.sequence.frames.push_back(FrameRecord::from_file(
          frame_id, scene.sequence.scene_id, static_cast<std::size_t>(order.get<long long>()), file));
    }
    std::stable_sort(scene.sequence.frames.begin(), scene.sequence.frames.end(),
                     [](const FrameRecord& a, const FrameRecord& b) { return a.order_index() < b.order_index(); });
    if (auto it = scenes[si].find("warps"); it != scenes[si].end()) {
      if (!it->is_array()) throw ManifestError(where + ".warps: expected an array");
      for (std::size_t wi = 0; wi < it->size(); ++wi) {
        const std::string ww = where + ".warps[" + std::to_string(wi) + "]";
        WarpRef ref{require_string((*it)[wi], "source_id", ww), require_string((*it)[wi], "target_id", ww),
                    resolve(require_string((*it)[wi], "path", ww))};
        if (!std::filesystem::is_regular_file(ref.path))
          throw ManifestError(ww + ".path: file not found: " + ref.path.string());
        scene.warps.push_back(std::move(ref));
      }
    }
    if (scene.sequence.frames.empty()) throw ManifestError(where + ".frames: scene has no frames");
    scene.sequence.validate();
    out.push_back(std::move(scene));
  }
  return out;
}

std::vector<SceneSequence> load_manifest(const std::filesystem::path& path) {
  std::vector<SceneSequence> out;
  for (auto& s : load_manifest_scenes(path)) out.push_back(std::move(s.sequence));
  return out;
}

}  // namespace mum

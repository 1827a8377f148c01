// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mum/errors.hpp"
#include "mum/image.hpp"

namespace mum {

/// Raised when a frame's pixels cannot be read or violate the frame invariants.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(std::string frame_id, const std::string& what)
      : std::runtime_error("frame '" + frame_id + "': " + what), frame_id_(std::move(frame_id)) {}
  const std::string& frame_id() const { return frame_id_; }

 private:
  std::string frame_id_;
};

/// Raised for malformed manifests; the message names the offending field.
class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One image of a scene. Pixels are either held in memory or decoded from
/// disk on first access and cached; copies share the cache.
class FrameRecord {
 public:
  FrameRecord() = default;
  static FrameRecord in_memory(std::string frame_id, std::string scene_id, std::size_t order_index,
                               Image image);
  static FrameRecord from_file(std::string frame_id, std::string scene_id, std::size_t order_index,
                               std::filesystem::path path);

  const std::string& frame_id() const { return frame_id_; }
  const std::string& scene_id() const { return scene_id_; }
  std::size_t order_index() const { return order_index_; }
  const std::filesystem::path& path() const;

  /// Decodes if needed. Throws IngestionError naming this frame on failure,
  /// or when the image is not 3-channel with values in [0, 1].
  const Image& image() const;

 private:
  struct Pixels;
  std::string frame_id_;
  std::string scene_id_;
  std::size_t order_index_ = 0;
  std::shared_ptr<Pixels> pixels_;
};

struct SceneSequence {
  std::string scene_id;
  std::vector<FrameRecord> frames;

  std::size_t length() const { return frames.size(); }
  /// Throws ContractError if a frame belongs to another scene or the sequence is empty.
  void validate() const;
};

/// Pairwise co-visibility scores between frames; symmetric, non-negative,
/// diagonal ignored.
struct OverlapMatrix {
  std::vector<std::string> frame_ids;
  std::vector<double> scores;  // F x F row-major

  std::size_t size() const { return frame_ids.size(); }
  double score(std::size_t i, std::size_t j) const { return scores[i * size() + j]; }
  void validate() const;
};

/// Dense map from source pixels to target pixel coordinates (x, y).
struct GroundTruthWarp {
  std::string source_id;
  std::string target_id;
  std::size_t height = 0;  // source image size
  std::size_t width = 0;
  std::vector<double> warp;          // (H, W, 2)
  std::vector<std::uint8_t> valid;   // (H, W)

  double x(std::size_t py, std::size_t px) const { return warp[(py * width + px) * 2]; }
  double y(std::size_t py, std::size_t px) const { return warp[(py * width + px) * 2 + 1]; }
  bool is_valid(std::size_t py, std::size_t px) const { return valid[py * width + px] != 0; }
};

// Binary layout: "MUMW", u32 H, u32 W, u32 2, then H*W*2 little-endian float32
// target coordinates, then H*W validity bytes (0/1).
void write_warp(const std::filesystem::path& path, const GroundTruthWarp& warp);
GroundTruthWarp read_warp(const std::filesystem::path& path);

/// Mirrors a warp for horizontally flipped source and/or target frames of
/// width `width` (target width when flipping the target).
GroundTruthWarp flip_warp(const GroundTruthWarp& gt, bool flip_source, bool flip_target,
                          std::size_t target_width);

/// Consecutive disjoint chunks of at most chunk_size frames. A trailing chunk
/// shorter than 2 frames is dropped. Frames must share a scene and be sorted
/// by order_index.
std::vector<SceneSequence> build_sequences_chunked(const std::vector<FrameRecord>& frames,
                                                   std::size_t chunk_size);

/// Greedy chain from `anchor`: repeatedly move to the unused frame with the
/// highest positive overlap with the current frame (ties to the lowest index)
/// until none remains. Returns frame indices.
std::vector<std::size_t> chain_from_anchor(const OverlapMatrix& overlap, std::size_t anchor);

/// num_sequences chains from uniformly drawn anchors; chains shorter than
/// min_len are discarded. Returns frame-id lists.
std::vector<std::vector<std::string>> build_sequences_chained(const OverlapMatrix& overlap,
                                                              std::size_t num_sequences,
                                                              std::size_t min_len,
                                                              std::uint64_t rng_seed);

/// Ground-truth warps attached to a manifest scene.
struct WarpRef {
  std::string source_id;
  std::string target_id;
  std::filesystem::path path;
};

struct ManifestScene {
  SceneSequence sequence;
  std::vector<WarpRef> warps;
};

/// Reads {"scenes":[{"scene_id","frames":[{"frame_id","path","order_index"}],
/// "warps"?:[{"source_id","target_id","path"}]}]}. Relative paths resolve
/// against the manifest's directory. Frames are loaded lazily, but every
/// referenced file must exist.
std::vector<ManifestScene> load_manifest_scenes(const std::filesystem::path& path);
std::vector<SceneSequence> load_manifest(const std::filesystem::path& path);

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mum/rng.hpp"
#include "mum/scene_data.hpp"

namespace mum {

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SamplerConfig {
  std::size_t min_len = 2;
  std::size_t max_len = 24;
  std::size_t frames_per_device = 96;
  double single_view_prob = 0.1;
  std::size_t image_size = 256;
  double flip_prob = 0.5;
  std::uint64_t rng_seed = 0;
  // Redraws allowed per batch row when a drawn sequence is shorter than S.
  std::size_t max_retries = 64;

  /// Returns every violated constraint; empty when valid.
  std::vector<std::string> problems() const;
  void validate() const;  // throws ConfigError listing all problems
};

/// (B, S, 3, image_size, image_size) pixels of B sequences with S views each.
struct MultiViewBatch {
  std::size_t batch = 0;
  std::size_t views = 0;
  std::size_t image_size = 0;
  std::vector<float> pixels;
  std::vector<std::string> scene_ids;               // B
  std::vector<std::vector<std::string>> frame_ids;  // B x S
  std::vector<std::uint8_t> flipped;                // B x S

  bool single_view() const { return views == 1; }
  Image frame(std::size_t b, std::size_t s) const;
};

/// A dataset and its relative sampling weight.
struct WeightedPool {
  double weight = 1.0;
  std::vector<SceneSequence> sequences;
};

/// Uniform on [min_len, max_len].
std::size_t draw_sequence_length(const SamplerConfig& cfg, Rng& rng);

/// S distinct frames drawn uniformly without replacement, kept in sequence order.
std::vector<FrameRecord> select_frames(const SceneSequence& seq, std::size_t count, Rng& rng);

/// With probability single_view_prob: frames_per_device frames from
/// single_view_pool (S = 1). Otherwise S ~ draw_sequence_length and
/// B = floor(frames_per_device / S) sequences, each from a pool chosen by
/// weight and a sequence drawn uniformly within it. Frames are resized to
/// image_size and flipped independently with flip_prob.
MultiViewBatch compose_batch(std::span<const WeightedPool> pools, std::span<const FrameRecord> single_view_pool,
                             const SamplerConfig& cfg, Rng& rng);
MultiViewBatch compose_batch(const std::vector<SceneSequence>& pool,
                             const std::vector<FrameRecord>& single_view_pool, const SamplerConfig& cfg,
                             Rng& rng);

/// Deterministic batch stream: batch `step` of worker `worker` depends only on
/// (rng_seed, worker, step), so streams can be resumed at any step.
class BatchStream {
 public:
  BatchStream(std::vector<WeightedPool> pools, std::vector<FrameRecord> single_view_pool, SamplerConfig cfg,
              std::uint64_t worker = 0);
  MultiViewBatch batch_at(std::uint64_t step) const;
  const SamplerConfig& config() const { return cfg_; }

 private:
  std::vector<WeightedPool> pools_;
  std::vector<FrameRecord> single_;
  SamplerConfig cfg_;
  std::uint64_t worker_;
};

}  // namespace mum

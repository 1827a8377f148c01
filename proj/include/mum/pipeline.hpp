// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mum/model.hpp"
#include "mum/probe.hpp"
#include "mum/sampler.hpp"
#include "mum/scene_data.hpp"
#include "mum/synthetic.hpp"

// Glue between on-disk datasets, training and evaluation, shared by the
// command-line tool and the acceptance suite.

namespace mum {

struct DatasetSpec {
  std::size_t scenes = 4;
  std::size_t views = 6;
  std::size_t size = 64;
  std::uint64_t seed = 0;
  bool warps = true;
  SyntheticRanges ranges;
};

/// Writes scene_NNN/<view>.mumf frames, warp files for every ordered view
/// pair and manifest.json under `out`. Output bytes depend only on `spec`.
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& out, const DatasetSpec& spec);

/// The seed used for scene `index` of a dataset.
std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t index);

struct TrainingData {
  std::vector<WeightedPool> pools;          // one pool of multi-view sequences
  std::vector<FrameRecord> single_view_pool;  // every frame
};

/// Multi-view pool from every sequence with at least two frames; all frames
/// form the single-view pool.
TrainingData training_data(const std::vector<ManifestScene>& scenes);

/// Source/target pairs with ground truth: every warp listed by the scenes.
struct ImagePair {
  std::string pair_id;
  Image source;
  Image target;
  GroundTruthWarp gt;
};

std::vector<ImagePair> image_pairs(const std::vector<ManifestScene>& scenes);

/// Frozen features after encoder block `layer` for each pair, both views
/// encoded together as one sequence.
std::vector<ProbePair> probe_pairs(std::span<const ImagePair> pairs, const ModelParams<float>& params,
                                   std::size_t layer);

}  // namespace mum

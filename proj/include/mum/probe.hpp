// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mum/masking.hpp"
#include "mum/scene_data.hpp"
#include "mum/tensor.hpp"

namespace mum {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MatchMode { soft, hard };

struct ProbeConfig {
  double temperature = 0.07;
  std::size_t train_steps = 300;
  double probe_lr = 3e-3;
  double weight_decay = 0.0;
  std::size_t eval_interval = 50;
  std::size_t batch_pairs = 8;
  std::uint64_t seed = 0;
  MatchMode eval_mode = MatchMode::soft;

  std::vector<std::string> problems() const;
  void validate() const;
};

/// Pixel coordinates (x, y) of patch centers, row-major over the grid.
std::vector<std::array<double, 2>> patch_centers(const PatchGrid& grid);

/// One predicted target coordinate per source patch.
struct WarpEstimate {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<double> coords;       // (N, 2) as x, y
  std::vector<std::uint8_t> valid;  // rows without a defined match are 0
  MatchMode mode = MatchMode::soft;

  std::size_t size() const { return grid_h * grid_w; }
};

/// s = (a P)(b P)^T / temperature. Soft mode averages target patch centers
/// under softmax(s) per row; hard mode takes the argmax (lowest index on ties).
WarpEstimate kernel_match(const Tensor<double>& feat_a, const Tensor<double>& feat_b,
                          const Tensor<double>& projection, double temperature, const PatchGrid& grid,
                          MatchMode mode);

/// Hard matches by cosine similarity. With apply_norm each row is first
/// standardized (zero mean, unit variance). Zero-norm source rows are left
/// invalid; zero-norm target rows are never matched.
WarpEstimate cosine_match(const Tensor<double>& feat_a, const Tensor<double>& feat_b, const PatchGrid& grid,
                          bool apply_norm);

struct MatchMetrics {
  double epe = 0.0;
  double robustness = 0.0;  // fraction of errors strictly below 32 px
  std::size_t n_valid = 0;
};

/// Errors at source patch centers where both gt and estimate are valid.
/// Throws EvaluationError when no such point exists.
MatchMetrics match_metrics(const WarpEstimate& est, const GroundTruthWarp& gt, const PatchGrid& grid);

/// Pools several pairs' errors into one set of metrics.
MatchMetrics pool_metrics(std::span<const MatchMetrics> parts);

/// Writes an estimate in the ground-truth warp layout (grid-sized, one pixel
/// per patch) for external plotting.
GroundTruthWarp to_ground_truth_layout(const WarpEstimate& est, std::string source_id, std::string target_id);

/// Frozen features of a source/target pair with its ground truth.
struct ProbePair {
  std::string pair_id;
  Tensor<double> feat_a;  // (N, width)
  Tensor<double> feat_b;
  GroundTruthWarp gt;
};

/// Index of the target patch whose center is nearest each valid source
/// center's ground-truth location, or -1 where the ground truth is invalid.
std::vector<std::int64_t> nearest_target_patch(const GroundTruthWarp& gt, const PatchGrid& grid);

struct ProbeEvaluation {
  std::size_t step = 0;
  MatchMetrics metrics;
};

struct ProbeResult {
  Tensor<double> projection;  // best-scoring projection
  MatchMetrics best;
  std::size_t best_step = 0;
  std::vector<ProbeEvaluation> evaluations;
  std::vector<MatchMetrics> per_pair;  // eval pairs under the best projection
};

/// Random initial projection: entries N(0, 1 / width^2).
Tensor<double> initial_projection(std::size_t width, std::uint64_t seed);

/// Trains the projection by cross-entropy to the nearest target patch on
/// train_pairs, evaluating on eval_pairs at step 0, every eval_interval steps
/// and at the end; returns the best evaluation by EPE.
ProbeResult train_probe(std::span<const ProbePair> train_pairs, std::span<const ProbePair> eval_pairs,
                        const PatchGrid& grid, const ProbeConfig& cfg);

/// Per-pair rows plus a pooled summary row.
void write_probe_csv(const std::filesystem::path& path, std::span<const ProbePair> pairs,
                     std::span<const MatchMetrics> per_pair);

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mum/masking.hpp"
#include "mum/model.hpp"
#include "mum/sampler.hpp"

namespace mum {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double base_lr = 1e-4;
  std::size_t batch_size_for_scaling = 256;
  std::size_t warmup_steps = 25000;
  std::size_t total_steps = 500000;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double min_lr = 0.0;
  std::optional<double> grad_clip;  // global L2 norm; off when empty
  std::uint64_t seed = 0;
  double mask_ratio = 0.75;
  bool normalize_target = true;
  bool reference_view = false;
  std::size_t log_interval = 10;
  std::size_t checkpoint_interval = 0;  // 0: only the final checkpoint

  double peak_lr() const { return base_lr * static_cast<double>(batch_size_for_scaling) / 256.0; }
  std::vector<std::string> problems() const;
  void validate() const;
};

/// Mean squared error over every (masked patch, pixel) entry of all views.
/// preds and targets are (V, N, patch_dim); masks has V entries. Zero when
/// nothing is masked.
template <typename T>
Tensor<T> mum_loss(const Tensor<T>& preds, const Tensor<T>& targets, std::span<const PatchMask> masks);

template <typename T>
struct DistillTriple {
  Tensor<T> points;
  Tensor<T> cameras;
  Tensor<T> depths;
};

/// Unweighted, unnormalized sum of squared differences of all three parts.
template <typename T>
Tensor<T> distill_loss(const DistillTriple<T>& student, const DistillTriple<T>& teacher);

/// Linear warmup from 0 to peak_lr(), then cosine decay to min_lr.
double lr_at(std::size_t step, const TrainConfig& cfg);

template <typename T>
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  static OptimizerState for_params(std::span<const NamedParam<T>> params);
};

/// Decoupled-decay Adam with bias correction; decay only where NamedParam::decay.
/// Throws TrainingError naming the first parameter with a non-finite gradient,
/// leaving parameters and state untouched.
template <typename T>
void adamw_step(std::span<const NamedParam<T>> params, std::span<const std::vector<T>> grads,
                OptimizerState<T>& state, double lr, const TrainConfig& cfg);

/// Scales gradients in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(std::span<std::vector<T>> grads, double max_norm);

/// Everything a run needs to continue exactly where it stopped.
struct TrainState {
  ModelParams<float> params;
  OptimizerState<float> optimizer;
  std::uint64_t step = 0;  // completed steps
};

/// Named-blob checkpoint directory: manifest.json plus one little-endian
/// float32 file per parameter and per optimizer moment.
void save_checkpoint(const std::filesystem::path& dir, const TrainState& state, const TrainConfig& train_cfg,
                     const SamplerConfig& sampler_cfg);
TrainState load_checkpoint(const std::filesystem::path& dir);
/// Parameters only, for evaluation.
ModelParams<float> load_checkpoint_params(const std::filesystem::path& dir);

struct StepRecord {
  std::uint64_t step = 0;  // 1-based count of completed steps
  double loss = 0.0;
  double lr = 0.0;
  std::size_t views = 0;
  std::size_t batch = 0;
};

struct TrainOptions {
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::filesystem::path metrics_path;    // empty: no CSV
  std::optional<std::filesystem::path> resume_from;
  std::optional<std::size_t> stop_after;  // stop early after this many completed steps
  const std::atomic<bool>* interrupt = nullptr;
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  TrainState state;
  std::vector<StepRecord> history;
  std::filesystem::path final_checkpoint;
  bool interrupted = false;
};

/// Reconstruction targets and encoder inputs for one sampled batch.
struct PreparedBatch {
  std::vector<MaskedViewTokens<float>> views;
  std::vector<PatchMask> masks;
  std::size_t views_per_sequence = 0;
  Tensor<float> targets;  // (B * S, N, patch_dim)
};

PreparedBatch prepare_batch(const MultiViewBatch& batch, const ModelConfig& model_cfg,
                            const TrainConfig& cfg, Rng& rng);

/// Parameters a run with this seed starts from.
ModelParams<float> initial_params(const ModelConfig& model_cfg, std::uint64_t seed);

/// The pretraining loop. Batches and masks for step k depend only on
/// (seed, k), so a resumed run reproduces an uninterrupted one.
TrainResult train(const std::vector<WeightedPool>& pools, const std::vector<FrameRecord>& single_view_pool,
                  const TrainConfig& cfg, const ModelConfig& model_cfg, const SamplerConfig& sampler_cfg,
                  const TrainOptions& opts = {});

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/sampler.hpp"

#include <algorithm>
#include <numeric>

namespace mum {

std::vector<std::string> SamplerConfig::problems() const {
  std::vector<std::string> out;
  if (min_len < 1) out.push_back("sampler.min_len must be at least 1");
  if (min_len > max_len) out.push_back("sampler.min_len must not exceed sampler.max_len");
  if (max_len > frames_per_device) out.push_back("sampler.max_len must not exceed sampler.frames_per_device");
  if (!(single_view_prob >= 0.0 && single_view_prob <= 1.0))
    out.push_back("sampler.single_view_prob must lie in [0, 1]");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) out.push_back("sampler.flip_prob must lie in [0, 1]");
  if (image_size == 0) out.push_back("sampler.image_size must be positive");
  return out;
}

void SamplerConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg;
  for (const auto& s : p) msg += (msg.empty() ? "" : "; ") + s;
  throw ConfigError(msg);
}

Image MultiViewBatch::frame(std::size_t b, std::size_t s) const {
  Image img(3, image_size, image_size);
  const std::size_t n = img.data.size();
  std::copy_n(pixels.begin() + static_cast<std::ptrdiff_t>((b * views + s) * n), n, img.data.begin());
  return img;
}

std::size_t draw_sequence_length(const SamplerConfig& cfg, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(cfg.min_len, cfg.max_len);
  return d(rng);
}

std::vector<FrameRecord> select_frames(const SceneSequence& seq, std::size_t count, Rng& rng) {
  if (count == 0) throw ContractError("select_frames: S must be positive");
  if (seq.length() < count)
    throw ContractError("select_frames: sequence '" + seq.scene_id + "' has " + std::to_string(seq.length()) +
                        " frames, fewer than S=" + std::to_string(count));
  std::vector<std::size_t> idx(seq.length());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  std::vector<FrameRecord> out;
  out.reserve(count);
  for (std::size_t i : idx) out.push_back(seq.frames[i]);
  return out;
}

namespace {

void append_frame(MultiViewBatch& batch, const FrameRecord& frame, const SamplerConfig& cfg, Rng& rng) {
  std::bernoulli_distribution flip(cfg.flip_prob);
  Image img = resize_bilinear(frame.image(), cfg.image_size, cfg.image_size);
  const bool f = flip(rng);
  if (f) img = flip_horizontal(img);
  batch.pixels.insert(batch.pixels.end(), img.data.begin(), img.data.end());
  batch.flipped.push_back(f);
}

}  // namespace

MultiViewBatch compose_batch(std::span<const WeightedPool> pools, std::span<const FrameRecord> single_view_pool,
                             const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  MultiViewBatch batch;
  batch.image_size = cfg.image_size;
  std::bernoulli_distribution single(cfg.single_view_prob);
  if (single(rng)) {
    if (single_view_pool.empty()) throw SamplingError("single-view pool is empty");
    batch.views = 1;
    batch.batch = cfg.frames_per_device;
    std::uniform_int_distribution<std::size_t> pick(0, single_view_pool.size() - 1);
    for (std::size_t b = 0; b < batch.batch; ++b) {
      const FrameRecord& f = single_view_pool[pick(rng)];
      batch.scene_ids.push_back(f.scene_id());
      batch.frame_ids.push_back({f.frame_id()});
      append_frame(batch, f, cfg, rng);
    }
    return batch;
  }

  std::vector<double> weights;
  for (const auto& p : pools) weights.push_back(p.sequences.empty() ? 0.0 : p.weight);
  if (std::all_of(weights.begin(), weights.end(), [](double w) { return w <= 0.0; }))
    throw SamplingError("no multi-view sequences to sample from");
  std::discrete_distribution<std::size_t> pick_pool(weights.begin(), weights.end());

  const std::size_t s = draw_sequence_length(cfg, rng);
  batch.views = s;
  batch.batch = cfg.frames_per_device / s;
  for (std::size_t b = 0; b < batch.batch; ++b) {
    const SceneSequence* chosen = nullptr;
    for (std::size_t attempt = 0; attempt <= cfg.max_retries && !chosen; ++attempt) {
      const auto& pool = pools[pick_pool(rng)].sequences;
      std::uniform_int_distribution<std::size_t> pick_seq(0, pool.size() - 1);
      const SceneSequence& seq = pool[pick_seq(rng)];
      if (seq.length() >= s) chosen = &seq;
    }
    if (!chosen)
      throw SamplingError("no sequence with at least " + std::to_string(s) + " frames after " +
                          std::to_string(cfg.max_retries) + " redraws");
    const auto frames = select_frames(*chosen, s, rng);
    batch.scene_ids.push_back(chosen->scene_id);
    std::vector<std::string> ids;
    for (const auto& f : frames) {
      ids.push_back(f.frame_id());
      append_frame(batch, f, cfg, rng);
    }
    batch.frame_ids.push_back(std::move(ids));
  }
  return batch;
}

MultiViewBatch compose_batch(const std::vector<SceneSequence>& pool,
                             const std::vector<FrameRecord>& single_view_pool, const SamplerConfig& cfg,
                             Rng& rng) {
  const WeightedPool wp{1.0, pool};
  return compose_batch(std::span<const WeightedPool>(&wp, 1), single_view_pool, cfg, rng);
}

BatchStream::BatchStream(std::vector<WeightedPool> pools, std::vector<FrameRecord> single_view_pool,
                         SamplerConfig cfg, std::uint64_t worker)
    : pools_(std::move(pools)), single_(std::move(single_view_pool)), cfg_(cfg), worker_(worker) {
  cfg_.validate();
}

MultiViewBatch BatchStream::batch_at(std::uint64_t step) const {
  Rng rng = derive_rng(cfg_.rng_seed, {0x73616d706c65ULL, worker_, step});
  return compose_batch(pools_, single_, cfg_, rng);
}

}  // namespace mum

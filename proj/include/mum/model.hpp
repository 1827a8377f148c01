// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mum/masking.hpp"
#include "mum/ops.hpp"
#include "mum/rng.hpp"

namespace mum {

enum class PosMode { rope, absolute };
enum class CommSite { decoder, encoder };

std::string to_string(PosMode m);
std::string to_string(CommSite c);
PosMode parse_pos_mode(const std::string& s);    // throws ConfigError
CommSite parse_comm_site(const std::string& s);  // throws ConfigError

struct ModelConfig {
  std::size_t enc_width = 32;
  std::size_t enc_depth = 4;
  std::size_t enc_heads = 2;
  std::size_t dec_width = 32;
  std::size_t dec_depth = 2;
  std::size_t dec_heads = 2;
  std::size_t patch_size = 8;
  PosMode pos_mode = PosMode::rope;
  CommSite comm_site = CommSite::decoder;
  double rope_base = 100.0;
  double mlp_ratio = 4.0;
  bool head_bias = true;
  // Largest grid side supported by learned absolute position tables.
  std::size_t max_grid = 32;

  std::size_t patch_dim() const { return 3 * patch_size * patch_size; }
  std::size_t enc_mlp() const;
  std::size_t dec_mlp() const;

  std::vector<std::string> problems() const;
  void validate() const;  // throws ConfigError listing all problems
};

template <typename T>
struct BlockParams {
  Tensor<T> norm1_gain, norm1_bias;
  Tensor<T> qkv_weight, qkv_bias;
  Tensor<T> proj_weight, proj_bias;
  Tensor<T> norm2_gain, norm2_bias;
  Tensor<T> fc1_weight, fc1_bias;
  Tensor<T> fc2_weight, fc2_bias;
};

/// A parameter handle with its checkpoint name; `decay` marks weight matrices.
template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
  bool decay = false;
};

template <typename T>
struct ModelParams {
  ModelConfig cfg;
  Tensor<T> patch_weight, patch_bias;
  Tensor<T> enc_pos;  // absolute mode only: (max_grid^2, enc_width)
  std::vector<BlockParams<T>> enc_blocks;
  Tensor<T> enc_norm_gain, enc_norm_bias;
  Tensor<T> dec_embed_weight, dec_embed_bias;
  Tensor<T> mask_token;  // (1, dec_width)
  Tensor<T> dec_pos;     // absolute mode only: (max_grid^2, dec_width)
  std::vector<BlockParams<T>> dec_blocks;
  Tensor<T> dec_norm_gain, dec_norm_bias;
  Tensor<T> head_weight, head_bias;  // head_bias undefined when cfg.head_bias is off

  /// Fixed-order handles to every parameter (shared with this object).
  std::vector<NamedParam<T>> named() const;
  std::size_t parameter_count() const;
  void set_requires_grad(bool on) const;
};

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, Rng& rng);

/// Deep copy converted to another precision.
template <typename U, typename T>
ModelParams<U> cast_params(const ModelParams<T>& p);

/// Visible-token features of R sequences of S views each, flattened as
/// rows of one matrix in (sequence, view, visible patch) order.
template <typename T>
struct TokenSet {
  Tensor<T> tokens;                // (num tokens, width)
  std::vector<GridPos> positions;  // grid (row, col) per token; shared across views
  std::vector<int> view;           // flat view index r * S + s per token
  std::vector<int> sequence;       // r per token
};

struct ForwardOptions {
  // Per decoder block: true for global attention. Defaults to the configured
  // schedule.
  std::optional<std::vector<bool>> decoder_global;
  // Records the head-averaged attention row of `capture->query` in decoder
  // block `capture_block`.
  AttentionCapture* capture = nullptr;
  std::size_t capture_block = 0;
};

/// True for blocks attending across views. Alternates starting frame-wise
/// where cross-view communication happens; all false elsewhere.
std::vector<bool> decoder_schedule(const ModelConfig& cfg);
std::vector<bool> encoder_schedule(const ModelConfig& cfg);

/// `views` holds R * views_per_sequence entries, sequence-major. All share one grid.
template <typename T>
TokenSet<T> encode(std::span<const MaskedViewTokens<T>> views, std::size_t views_per_sequence,
                   const ModelParams<T>& params);

/// Per-patch pixel predictions of shape (R * S, N, patch_dim).
template <typename T>
Tensor<T> decode(const TokenSet<T>& encoded, std::span<const MaskedViewTokens<T>> views,
                 std::size_t views_per_sequence, const ModelParams<T>& params,
                 const ForwardOptions& opts = {});

template <typename T>
Tensor<T> forward(std::span<const MaskedViewTokens<T>> views, std::size_t views_per_sequence,
                  const ModelParams<T>& params, const ForwardOptions& opts = {});

/// Unmasked features of one sequence after encoder block `layer` (1-based),
/// followed by the encoder's final norm. Shape (S, N, enc_width).
template <typename T>
Tensor<T> extract_features(std::span<const Image> images, std::size_t layer, const ModelParams<T>& params);

struct AttentionQuery {
  std::size_t view = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  bool masked = false;  // feed the query patch as a mask token
};

/// Head-averaged attention of the query token over all S * N decoder tokens
/// at decoder block `block` (0-based), which must be a global block. Views are
/// fully visible except the query patch when `masked` is set.
struct AttentionMap {
  std::size_t views = 0;
  std::size_t patches = 0;
  std::vector<double> weights;       // (S, N), sums to 1
  std::vector<double> per_view;      // (S, N), each view renormalized to sum 1
};

template <typename T>
AttentionMap attention_map(std::span<const Image> images, AttentionQuery query, std::size_t block,
                           const ModelParams<T>& params);

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "mum/image.hpp"
#include "mum/rng.hpp"
#include "mum/tensor.hpp"

namespace mum {

/// Non-overlapping square patches tiling an image exactly.
struct PatchGrid {
  std::size_t patch_size = 16;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  /// Throws DimensionError if height or width is not a multiple of patch_size.
  static PatchGrid for_image(std::size_t height, std::size_t width, std::size_t patch_size);

  std::size_t num_patches() const { return grid_h * grid_w; }
  std::size_t patch_dim() const { return 3 * patch_size * patch_size; }
  std::size_t height() const { return grid_h * patch_size; }
  std::size_t width() const { return grid_w * patch_size; }
  bool operator==(const PatchGrid&) const = default;
};

/// bits[k] is 1 when patch k is masked (hidden from the encoder).
struct PatchMask {
  std::vector<std::uint8_t> bits;
  double ratio = 0.0;

  std::size_t size() const { return bits.size(); }
  std::size_t masked_count() const;
  static PatchMask none(std::size_t n) { return {std::vector<std::uint8_t>(n, 0), 0.0}; }
};

/// round(gamma * n) with exact halves rounded down.
std::size_t masked_count_for(std::size_t n, double gamma);

/// Exactly masked_count_for(n, gamma) patches, uniformly without replacement.
PatchMask sample_mask(std::size_t n, double gamma, Rng& rng);

/// When enabled, view 0 becomes fully visible; other masks are unchanged.
std::vector<PatchMask> apply_reference_view(std::vector<PatchMask> masks, bool enabled);

/// Row k is patch (k / grid_w, k % grid_w), flattened channel-major then
/// row-major within the patch.
template <typename T>
Tensor<T> patchify(const Image& image, const PatchGrid& grid);
template <typename T>
Image unpatchify(const Tensor<T>& patches, const PatchGrid& grid);

/// With `normalize`, each row becomes (row - mean) / (std + eps) using the
/// population standard deviation; otherwise the rows are copied unchanged.
template <typename T>
Tensor<T> pixel_target(const Tensor<T>& patches, bool normalize, T eps = T(1e-6));

/// One view ready for the encoder: its visible patches plus the full
/// reconstruction target.
template <typename T>
struct MaskedViewTokens {
  PatchGrid grid;
  PatchMask mask;
  std::vector<std::int64_t> visible_indices;  // strictly increasing
  Tensor<T> visible_patches;                  // (N_vis, patch_dim)
  Tensor<T> target;                           // (N, patch_dim)
};

template <typename T>
MaskedViewTokens<T> make_masked_view(const Image& image, const PatchGrid& grid, PatchMask mask,
                                     bool normalize_target = true);

}  // namespace mum

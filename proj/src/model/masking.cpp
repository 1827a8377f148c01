// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mum/ops.hpp"

namespace mum {

PatchGrid PatchGrid::for_image(std::size_t height, std::size_t width, std::size_t patch_size) {
  if (patch_size == 0 || height % patch_size != 0 || width % patch_size != 0)
    throw DimensionError("image " + std::to_string(height) + "x" + std::to_string(width) +
                         " is not divisible into " + std::to_string(patch_size) + "-pixel patches");
  return {patch_size, height / patch_size, width / patch_size};
}

std::size_t PatchMask::masked_count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::size_t masked_count_for(std::size_t n, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractError("mask ratio must lie in [0, 1]");
  const double v = gamma * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::floor(v));
  if (v - static_cast<double>(k) > 0.5) ++k;
  return std::min(k, n);
}

PatchMask sample_mask(std::size_t n, double gamma, Rng& rng) {
  const std::size_t k = masked_count_for(n, gamma);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  PatchMask mask{std::vector<std::uint8_t>(n, 0), gamma};
  for (std::size_t i = 0; i < k; ++i) mask.bits[order[i]] = 1;
  return mask;
}

std::vector<PatchMask> apply_reference_view(std::vector<PatchMask> masks, bool enabled) {
  if (masks.empty()) throw ContractError("apply_reference_view needs at least one mask");
  if (enabled) masks[0] = PatchMask::none(masks[0].size());
  return masks;
}

template <typename T>
Tensor<T> patchify(const Image& image, const PatchGrid& grid) {
  if (image.channels != 3 || image.height != grid.height() || image.width != grid.width())
    throw DimensionError("patchify: image " + std::to_string(image.channels) + "x" +
                         std::to_string(image.height) + "x" + std::to_string(image.width) +
                         " does not match a " + std::to_string(grid.grid_h) + "x" +
                         std::to_string(grid.grid_w) + " grid of " + std::to_string(grid.patch_size) +
                         "-pixel patches");
  const std::size_t ps = grid.patch_size, pd = grid.patch_dim();
  std::vector<T> out(grid.num_patches() * pd);
  for (std::size_t k = 0; k < grid.num_patches(); ++k) {
    const std::size_t r = k / grid.grid_w, c = k % grid.grid_w;
    T* row = out.data() + k * pd;
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t dy = 0; dy < ps; ++dy)
        for (std::size_t dx = 0; dx < ps; ++dx)
          row[(ch * ps + dy) * ps + dx] = static_cast<T>(image.at(ch, r * ps + dy, c * ps + dx));
  }
  return Tensor<T>::from({grid.num_patches(), pd}, std::move(out));
}

template <typename T>
Image unpatchify(const Tensor<T>& patches, const PatchGrid& grid) {
  const std::size_t ps = grid.patch_size, pd = grid.patch_dim();
  if (patches.shape() != Shape{grid.num_patches(), pd})
    throw DimensionError("unpatchify: " + shape_str(patches.shape()) + " does not match grid");
  Image img(3, grid.height(), grid.width());
  const auto v = patches.values();
  for (std::size_t k = 0; k < grid.num_patches(); ++k) {
    const std::size_t r = k / grid.grid_w, c = k % grid.grid_w;
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t dy = 0; dy < ps; ++dy)
        for (std::size_t dx = 0; dx < ps; ++dx)
          img.at(ch, r * ps + dy, c * ps + dx) = static_cast<float>(v[k * pd + (ch * ps + dy) * ps + dx]);
  }
  return img;
}

template <typename T>
Tensor<T> pixel_target(const Tensor<T>& patches, bool normalize, T eps) {
  if (!(eps > T(0))) throw ContractError("pixel_target: eps must be positive");
  if (patches.rank() != 2) throw DimensionError("pixel_target: expected (N, patch_dim), got " + shape_str(patches.shape()));
  std::vector<T> out(patches.values().begin(), patches.values().end());
  if (!normalize) return Tensor<T>::from(patches.shape(), std::move(out));
  const std::size_t n = patches.dim(0), d = patches.dim(1);
  for (std::size_t r = 0; r < n; ++r) {
    T* row = out.data() + r * d;
    // Mean as an offset from the first entry so constant rows give exact zeros.
    T shift = 0;
    for (std::size_t j = 0; j < d; ++j) shift += row[j] - row[0];
    const T mu = row[0] + shift / static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    const T denom = std::sqrt(var / static_cast<T>(d)) + eps;
    for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - mu) / denom;
  }
  return Tensor<T>::from(patches.shape(), std::move(out));
}

template <typename T>
MaskedViewTokens<T> make_masked_view(const Image& image, const PatchGrid& grid, PatchMask mask,
                                     bool normalize_target) {
  if (mask.size() != grid.num_patches())
    throw DimensionError("mask of " + std::to_string(mask.size()) + " bits for " +
                         std::to_string(grid.num_patches()) + " patches");
  const Tensor<T> patches = patchify<T>(image, grid);
  MaskedViewTokens<T> view;
  view.grid = grid;
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (!mask.bits[k]) view.visible_indices.push_back(static_cast<std::int64_t>(k));
  view.mask = std::move(mask);
  {
    NoGradGuard no_grad;
    view.visible_patches = select_rows(patches, view.visible_indices);
  }
  view.target = pixel_target(patches, normalize_target);
  return view;
}

#define MUM_INSTANTIATE_MASKING(T)                                                            \
  template Tensor<T> patchify<T>(const Image&, const PatchGrid&);                            \
  template Image unpatchify<T>(const Tensor<T>&, const PatchGrid&);                          \
  template Tensor<T> pixel_target<T>(const Tensor<T>&, bool, T);                             \
  template MaskedViewTokens<T> make_masked_view<T>(const Image&, const PatchGrid&, PatchMask, bool);

MUM_INSTANTIATE_MASKING(float)
MUM_INSTANTIATE_MASKING(double)

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mum/rng.hpp"
#include "mum/scene_data.hpp"

namespace mum {

/// 3x3 projective map on pixel coordinates (x, y), row-major.
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Homography identity() { return {}; }
  static Homography translation(double tx, double ty) { return {{1, 0, tx, 0, 1, ty, 0, 0, 1}}; }
  /// Rotation by `radians` and isotropic scaling about (cx, cy), then a shift.
  static Homography similarity(double radians, double scale, double tx, double ty, double cx, double cy);

  std::array<double, 2> apply(double x, double y) const;
  Homography inverse() const;
  Homography operator*(const Homography& rhs) const;  // (this * rhs)(p) = this(rhs(p))
};

/// Smooth random color texture defined on the whole plane: a sum of random
/// low-frequency sinusoids per channel.
struct SmoothTexture {
  struct Wave {
    double fx, fy, phase;
    std::array<double, 3> amplitude;
  };
  std::vector<Wave> waves;
  std::array<double, 3> norm{1, 1, 1};

  static SmoothTexture random(Rng& rng, std::size_t num_waves = 24, double min_wavelength = 24.0,
                              double max_wavelength = 96.0);
  double sample(std::size_t channel, double x, double y) const;  // in [0, 1]
};

/// Renders pixel p of a view as the texture at ref_from_view(p).
Image render_view(const SmoothTexture& texture, const Homography& view_from_reference,
                  std::size_t height, std::size_t width);

/// Warp of every source pixel under `target_from_source`; a pixel is valid
/// when it lands inside [0, W-1] x [0, H-1] of the target.
GroundTruthWarp homography_warp(const Homography& target_from_source, std::size_t height,
                                std::size_t width, std::string source_id, std::string target_id);

struct SyntheticScene {
  SceneSequence sequence;
  std::vector<Homography> view_from_reference;  // view 0 is the identity
  std::vector<GroundTruthWarp> warps;           // every ordered pair (a, b), a != b
  const GroundTruthWarp& warp(std::size_t from, std::size_t to) const;
};

/// Homography ranges of the generated views.
struct SyntheticRanges {
  double min_wavelength = 24.0;  // texture wavelengths, pixels
  double max_wavelength = 96.0;
  double max_rotation_deg = 15.0;
  double min_scale = 0.8;
  double max_scale = 1.25;
  double max_translation_frac = 0.12;
  double gain_jitter = 0.08;
  double bias_jitter = 0.04;
  double noise_std = 0.01;
};

SyntheticScene generate_synthetic_scene(std::uint64_t rng_seed, std::size_t n_views, std::size_t height,
                                        std::size_t width, const std::string& scene_id = "synthetic",
                                        const SyntheticRanges& ranges = {});

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mum {

Homography Homography::similarity(double radians, double scale, double tx, double ty, double cx,
                                  double cy) {
  const double c = std::cos(radians) * scale, s = std::sin(radians) * scale;
  // T(c + t) * R * S * T(-c)
  return {{c, -s, cx + tx - c * cx + s * cy, s, c, cy + ty - s * cx - c * cy, 0, 0, 1}};
}

std::array<double, 2> Homography::apply(double x, double y) const {
  const double w = m[6] * x + m[7] * y + m[8];
  return {(m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w};
}

Homography Homography::inverse() const {
  const auto& a = m;
  const double c00 = a[4] * a[8] - a[5] * a[7];
  const double c01 = a[5] * a[6] - a[3] * a[8];
  const double c02 = a[3] * a[7] - a[4] * a[6];
  const double det = a[0] * c00 + a[1] * c01 + a[2] * c02;
  if (std::abs(det) < 1e-15) throw ContractError("homography is singular");
  Homography inv;
  inv.m = {c00 / det,
           (a[2] * a[7] - a[1] * a[8]) / det,
           (a[1] * a[5] - a[2] * a[4]) / det,
           c01 / det,
           (a[0] * a[8] - a[2] * a[6]) / det,
           (a[2] * a[3] - a[0] * a[5]) / det,
           c02 / det,
           (a[1] * a[6] - a[0] * a[7]) / det,
           (a[0] * a[4] - a[1] * a[3]) / det};
  return inv;
}

Homography Homography::operator*(const Homography& rhs) const {
  Homography out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += m[r * 3 + k] * rhs.m[k * 3 + c];
      out.m[r * 3 + c] = s;
    }
  return out;
}

SmoothTexture SmoothTexture::random(Rng& rng, std::size_t num_waves, double min_wavelength, double max_wavelength) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SmoothTexture t;
  std::array<double, 3> energy{0, 0, 0};
  for (std::size_t k = 0; k < num_waves; ++k) {
    const double freq = 1.0 / (min_wavelength + (max_wavelength - min_wavelength) * unit(rng));
    const double dir = 2.0 * std::numbers::pi * unit(rng);
    Wave w{freq * std::cos(dir), freq * std::sin(dir), 2.0 * std::numbers::pi * unit(rng), {}};
    for (std::size_t c = 0; c < 3; ++c) {
      w.amplitude[c] = 2.0 * unit(rng) - 1.0;
      energy[c] += 0.5 * w.amplitude[c] * w.amplitude[c];
    }
    t.waves.push_back(w);
  }
  for (std::size_t c = 0; c < 3; ++c) t.norm[c] = 1.0 / std::sqrt(std::max(energy[c], 1e-12));
  return t;
}

double SmoothTexture::sample(std::size_t channel, double x, double y) const {
  double v = 0;
  for (const auto& w : waves)
    v += w.amplitude[channel] * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
  return std::clamp(0.5 + 0.22 * v * norm[channel], 0.0, 1.0);
}

Image render_view(const SmoothTexture& texture, const Homography& view_from_reference,
                  std::size_t height, std::size_t width) {
  const Homography ref_from_view = view_from_reference.inverse();
  Image img(3, height, width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const auto p = ref_from_view.apply(static_cast<double>(x), static_cast<double>(y));
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(texture.sample(c, p[0], p[1]));
    }
  return img;
}

GroundTruthWarp homography_warp(const Homography& target_from_source, std::size_t height,
                                std::size_t width, std::string source_id, std::string target_id) {
  GroundTruthWarp w;
  w.source_id = std::move(source_id);
  w.target_id = std::move(target_id);
  w.height = height;
  w.width = width;
  w.warp.resize(height * width * 2);
  w.valid.resize(height * width);
  const double xmax = static_cast<double>(width - 1), ymax = static_cast<double>(height - 1);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const auto p = target_from_source.apply(static_cast<double>(x), static_cast<double>(y));
      w.warp[(y * width + x) * 2] = p[0];
      w.warp[(y * width + x) * 2 + 1] = p[1];
      w.valid[y * width + x] = p[0] >= 0.0 && p[0] <= xmax && p[1] >= 0.0 && p[1] <= ymax;
    }
  return w;
}

const GroundTruthWarp& SyntheticScene::warp(std::size_t from, std::size_t to) const {
  const std::size_t n = view_from_reference.size();
  if (from >= n || to >= n || from == to) throw ContractError("no warp for this view pair");
  return warps[from * (n - 1) + (to < from ? to : to - 1)];
}

SyntheticScene generate_synthetic_scene(std::uint64_t rng_seed, std::size_t n_views, std::size_t height,
                                        std::size_t width, const std::string& scene_id,
                                        const SyntheticRanges& ranges) {
  if (n_views < 1) throw ContractError("n_views must be at least 1");
  if (height < 32 || width < 32) throw ContractError("synthetic images must be at least 32x32");
  Rng rng = derive_rng(rng_seed, {0x7363656e65ULL});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const SmoothTexture texture = SmoothTexture::random(rng, 24, ranges.min_wavelength, ranges.max_wavelength);
  const double cx = (static_cast<double>(width) - 1) / 2, cy = (static_cast<double>(height) - 1) / 2;

  SyntheticScene scene;
  scene.sequence.scene_id = scene_id;
  std::normal_distribution<double> noise(0.0, ranges.noise_std);
  for (std::size_t v = 0; v < n_views; ++v) {
    Homography h = Homography::identity();
    if (v > 0) {
      const double rot = uniform(-ranges.max_rotation_deg, ranges.max_rotation_deg) * std::numbers::pi / 180.0;
      const double scale = std::exp(uniform(std::log(ranges.min_scale), std::log(ranges.max_scale)));
      const double tx = uniform(-ranges.max_translation_frac, ranges.max_translation_frac) * width;
      const double ty = uniform(-ranges.max_translation_frac, ranges.max_translation_frac) * height;
      h = Homography::similarity(rot, scale, tx, ty, cx, cy);
    }
    scene.view_from_reference.push_back(h);
    Image img = render_view(texture, h, height, width);
    const double gain = 1.0 + uniform(-ranges.gain_jitter, ranges.gain_jitter);
    const double bias = uniform(-ranges.bias_jitter, ranges.bias_jitter);
    for (auto& px : img.data)
      px = static_cast<float>(std::clamp((px - 0.5) * gain + 0.5 + bias + noise(rng), 0.0, 1.0));
    scene.sequence.frames.push_back(
        FrameRecord::in_memory(scene_id + "/" + std::to_string(v), scene_id, v, std::move(img)));
  }
  for (std::size_t a = 0; a < n_views; ++a)
    for (std::size_t b = 0; b < n_views; ++b) {
      if (a == b) continue;
      const Homography b_from_a = scene.view_from_reference[b] * scene.view_from_reference[a].inverse();
      scene.warps.push_back(homography_warp(b_from_a, height, width, scene.sequence.frames[a].frame_id(),
                                            scene.sequence.frames[b].frame_id()));
    }
  return scene;
}

}  // namespace mum

// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace mum {

/// Channel-major (C, H, W) float image, values nominally in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
};

class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw float blob: "MUMF", u32 C, u32 H, u32 W (little-endian), then C*H*W
// little-endian float32 values.
void write_mumf(const std::filesystem::path& path, const Image& image);
Image read_mumf(const std::filesystem::path& path);

// 8-bit PNG, converted to RGB and scaled to [0, 1].
Image read_png(const std::filesystem::path& path);

// Dispatches on the file magic.
Image read_image(const std::filesystem::path& path);

// Bilinear resampling with half-pixel centers; no antialiasing.
Image resize_bilinear(const Image& src, std::size_t height, std::size_t width);
Image flip_horizontal(const Image& src);

}  // namespace mum

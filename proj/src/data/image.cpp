// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#include "mum/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mum/binary_io.hpp"

namespace mum {

void write_mumf(const std::filesystem::path& path, const Image& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("MUMF", 4);
  binary::write_u32(os, static_cast<std::uint32_t>(image.channels));
  binary::write_u32(os, static_cast<std::uint32_t>(image.height));
  binary::write_u32(os, static_cast<std::uint32_t>(image.width));
  binary::write_f32(os, image.data);
  if (!os) throw std::runtime_error("short write to " + path.string());
}

Image read_mumf(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ImageFormatError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "MUMF", 4) != 0)
    throw ImageFormatError(path.string() + ": bad magic, expected MUMF");
  try {
    Image img;
    img.channels = binary::read_u32(is);
    img.height = binary::read_u32(is);
    img.width = binary::read_u32(is);
    if (img.channels == 0 || img.height == 0 || img.width == 0)
      throw ImageFormatError(path.string() + ": zero-sized image");
    img.data = binary::read_f32(is, img.channels * img.height * img.width);
    return img;
  } catch (const ImageFormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw ImageFormatError(path.string() + ": " + e.what());
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw ImageFormatError(path.string() + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ImageFormatError(path.string() + ": " + png.message);
  }
  Image img(3, png.height, png.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<float>(buffer[(y * img.width + x) * 3 + c]) / 255.0f;
  return img;
}

Image read_image(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ImageFormatError("cannot open " + path.string());
  unsigned char magic[8] = {};
  is.read(reinterpret_cast<char*>(magic), 8);
  if (std::memcmp(magic, "MUMF", 4) == 0) return read_mumf(path);
  static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (std::memcmp(magic, kPng, 8) == 0) return read_png(path);
  throw ImageFormatError(path.string() + ": unrecognized image format");
}

Image resize_bilinear(const Image& src, std::size_t height, std::size_t width) {
  if (src.height == height && src.width == width) return src;
  Image out(src.channels, height, width);
  const double sy = static_cast<double>(src.height) / height;
  const double sx = static_cast<double>(src.width) / width;
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (std::size_t c = 0; c < src.channels; ++c) {
        const double top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        const double bot = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        out.at(c, y, x) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Image flip_horizontal(const Image& src) {
  Image out(src.channels, src.height, src.width);
  for (std::size_t c = 0; c < src.channels; ++c)
    for (std::size_t y = 0; y < src.height; ++y)
      for (std::size_t x = 0; x < src.width; ++x) out.at(c, y, x) = src.at(c, y, src.width - 1 - x);
  return out;
}

}  // namespace mum

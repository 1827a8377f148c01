// Copyright 2026 The MuM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

// Little-endian helpers shared by the image, warp and checkpoint formats.

namespace mum::binary {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out;
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
    return out;
  }
  return v;
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("truncated header");
  return to_little(v);
}

inline void write_f32(std::ostream& os, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float f : values) {
      std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(f));
      os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

inline std::vector<float> read_f32(std::istream& is, std::size_t count) {
  std::vector<float> out(count);
  if (!is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * sizeof(float))))
    throw std::runtime_error("truncated float payload");
  if constexpr (std::endian::native == std::endian::big)
    for (auto& f : out) f = std::bit_cast<float>(to_little(std::bit_cast<std::uint32_t>(f)));
  return out;
}

}  // namespace mum::binary

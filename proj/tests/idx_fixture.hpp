#pragma once

#include <cstdint>
#include <vector>

// Byte-level IDX writer used as the reference layout in tests.
inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint8_t fixture_pixel(std::size_t image, std::size_t i) {
  return static_cast<std::uint8_t>((i * 37 + image * 101) % 256);
}

inline std::vector<std::uint8_t> idx_images(std::uint32_t n) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000803);
  put_be32(out, n);
  put_be32(out, 28);
  put_be32(out, 28);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < 784; ++i) out.push_back(fixture_pixel(k, i));
  return out;
}

inline std::vector<std::uint8_t> idx_labels(std::uint32_t n) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000801);
  put_be32(out, n);
  for (std::uint32_t k = 0; k < n; ++k) out.push_back(static_cast<std::uint8_t>((k * 3 + 7) % 10));
  return out;
}

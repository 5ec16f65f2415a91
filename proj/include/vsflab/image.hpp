#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vsflab/common.hpp"

namespace vsflab {

// 8-bit grayscale image, row-major.
struct GrayImage {
  int w = 0, h = 0;
  std::vector<std::uint8_t> px;

  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0)
      : w(width), h(height),
        px(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
           fill) {
    require(width > 0 && height > 0, "image extents must be positive");
  }

  std::uint8_t at(int y, int x) const {
    return px[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
              static_cast<std::size_t>(x)];
  }
  std::uint8_t& at(int y, int x) {
    return px[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
              static_cast<std::size_t>(x)];
  }
  bool operator==(const GrayImage&) const = default;
};

// Binary PGM (P5), maxval 255.
void write_pgm(std::ostream& os, const GrayImage& img);
GrayImage read_pgm(std::istream& is);
void write_pgm_file(const std::string& path, const GrayImage& img);
GrayImage read_pgm_file(const std::string& path);

// Bilinear resampling to (out_w, out_h).
GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h);

}  // namespace vsflab

#include "vsflab/image.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace vsflab {

void write_pgm(std::ostream& os, const GrayImage& img) {
  require(img.w > 0 && img.h > 0, "write_pgm: empty image");
  os << "P5\n" << img.w << " " << img.h << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.px.data()),
           static_cast<std::streamsize>(img.px.size()));
  require(bool(os), "write_pgm: write failed");
}

namespace {

// Next header token, skipping whitespace and '#' comments.
int next_pgm_int(std::istream& is, const char* what) {
  for (;;) {
    const int c = is.peek();
    require(c != EOF, std::string("read_pgm: truncated header at ") + what);
    if (c == '#') {
      is.ignore(1 << 20, '\n');
      continue;
    }
    if (std::isspace(c)) {
      is.get();
      continue;
    }
    break;
  }
  int v = 0;
  is >> v;
  require(bool(is), std::string("read_pgm: bad integer at ") + what);
  return v;
}

}  // namespace

GrayImage read_pgm(std::istream& is) {
  char m0 = 0, m1 = 0;
  is.get(m0).get(m1);
  require(bool(is) && m0 == 'P' && m1 == '5', "read_pgm: not a binary PGM");
  const int w = next_pgm_int(is, "width");
  const int h = next_pgm_int(is, "height");
  const int maxval = next_pgm_int(is, "maxval");
  require(w > 0 && h > 0, "read_pgm: bad extents");
  require(maxval == 255, "read_pgm: maxval must be 255");
  is.get();  // single whitespace before the raster
  GrayImage img(w, h);
  is.read(reinterpret_cast<char*>(img.px.data()),
          static_cast<std::streamsize>(img.px.size()));
  require(is.gcount() == static_cast<std::streamsize>(img.px.size()),
          "read_pgm: truncated raster");
  return img;
}

void write_pgm_file(const std::string& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), "cannot open for write: " + path);
  write_pgm(os, img);
}

GrayImage read_pgm_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), "cannot open: " + path);
  return read_pgm(is);
}

GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h) {
  require(out_w > 0 && out_h > 0, "resize_bilinear: bad extents");
  GrayImage out(out_w, out_h);
  const double sx = static_cast<double>(img.w) / out_w;
  const double sy = static_cast<double>(img.h) / out_h;
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const double fy = (y + 0.5) * sy - 0.5;
      const double fx = (x + 0.5) * sx - 0.5;
      const int y0 = static_cast<int>(std::floor(fy));
      const int x0 = static_cast<int>(std::floor(fx));
      const double wy = fy - y0, wx = fx - x0;
      double acc = 0.0;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          const int yy = std::min(std::max(y0 + dy, 0), img.h - 1);
          const int xx = std::min(std::max(x0 + dx, 0), img.w - 1);
          const double w =
              (dy ? wy : 1.0 - wy) * (dx ? wx : 1.0 - wx);
          acc += w * img.at(yy, xx);
        }
      out.at(y, x) = static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, acc))));
    }
  return out;
}

}  // namespace vsflab

#include "vsflab/objectness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vsflab {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_box(const GrayImage& img, const BoxI& box) {
  require(box.x1 >= 0 && box.y1 >= 0 && box.x2 <= img.w && box.y2 <= img.h &&
              box.width() > 0 && box.height() > 0,
          "objectness: box must lie inside the image with positive area");
}

// Double-valued image plane with clamped-edge access.
struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;

  Plane(int width, int height) : w(width), h(height),
      v(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {}

  double& at(int y, int x) {
    return v[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
             static_cast<std::size_t>(x)];
  }
  double at(int y, int x) const {
    return v[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
             static_cast<std::size_t>(x)];
  }
  double clamped(int y, int x) const {
    return at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1));
  }
};

Plane to_plane(const GrayImage& img) {
  Plane p(img.w, img.h);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) p.at(y, x) = img.at(y, x);
  return p;
}

// Bilinear resample with centered sample points, edges clamped.
Plane resize_plane(const Plane& src, int out_w, int out_h) {
  Plane out(out_w, out_h);
  const double sx = static_cast<double>(src.w) / out_w;
  const double sy = static_cast<double>(src.h) / out_h;
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const double fy = (y + 0.5) * sy - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const int y0 = static_cast<int>(std::floor(fy));
      const double ax = fx - x0, ay = fy - y0;
      out.at(y, x) = (1 - ay) * ((1 - ax) * src.clamped(y0, x0) +
                                 ax * src.clamped(y0, x0 + 1)) +
                     ay * ((1 - ax) * src.clamped(y0 + 1, x0) +
                           ax * src.clamped(y0 + 1, x0 + 1));
    }
  return out;
}

Plane gaussian_blur(const Plane& src, double sigma, int radius) {
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] =
        std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= sum;
  Plane tmp(src.w, src.h), out(src.w, src.h);
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] * src.clamped(y, x + i);
      tmp.at(y, x) = acc;
    }
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.clamped(y + i, x);
      out.at(y, x) = acc;
    }
  return out;
}

}  // namespace

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  require(n >= 1 && (n & (n - 1)) == 0, "fft: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2 * kPi / static_cast<double>(len) * (inverse ? 1 : -1);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

namespace {

// 2-D FFT over a square power-of-two grid, rows then columns.
void fft2d(std::vector<std::complex<double>>& a, int n, bool inverse) {
  std::vector<std::complex<double>> line(static_cast<std::size_t>(n));
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x)
      line[static_cast<std::size_t>(x)] =
          a[static_cast<std::size_t>(y) * static_cast<std::size_t>(n) +
            static_cast<std::size_t>(x)];
    fft_radix2(line, inverse);
    for (int x = 0; x < n; ++x)
      a[static_cast<std::size_t>(y) * static_cast<std::size_t>(n) +
        static_cast<std::size_t>(x)] = line[static_cast<std::size_t>(x)];
  }
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y)
      line[static_cast<std::size_t>(y)] =
          a[static_cast<std::size_t>(y) * static_cast<std::size_t>(n) +
            static_cast<std::size_t>(x)];
    fft_radix2(line, inverse);
    for (int y = 0; y < n; ++y)
      a[static_cast<std::size_t>(y) * static_cast<std::size_t>(n) +
        static_cast<std::size_t>(x)] = line[static_cast<std::size_t>(y)];
  }
}

// One spectral-residual pass at an n x n analysis scale: suppress the smooth
// part of the log amplitude spectrum, keep the phase, and square the inverse
// transform.
Plane spectral_residual(const Plane& img, int n) {
  const Plane small = resize_plane(img, n, n);
  std::vector<std::complex<double>> f(static_cast<std::size_t>(n) *
                                      static_cast<std::size_t>(n));
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      f[static_cast<std::size_t>(y * n + x)] = small.at(y, x);
  fft2d(f, n, false);

  Plane logamp(n, n), phase(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const auto c = f[static_cast<std::size_t>(y * n + x)];
      logamp.at(y, x) = std::log(std::abs(c) + 1e-12);
      phase.at(y, x) = std::arg(c);
    }
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) acc += logamp.clamped(y + dy, x + dx);
      const double residual = logamp.at(y, x) - acc / 9.0;
      const double amp = std::exp(residual);
      f[static_cast<std::size_t>(y * n + x)] =
          std::polar(amp, phase.at(y, x));
    }
  fft2d(f, n, true);

  Plane sal(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double m = std::abs(f[static_cast<std::size_t>(y * n + x)]);
      sal.at(y, x) = m * m;
    }
  sal = gaussian_blur(sal, 2.5, 5);
  double mx = 0.0;
  for (double v : sal.v) mx = std::max(mx, v);
  if (mx > 0)
    for (double& v : sal.v) v /= mx;
  return sal;
}

}  // namespace

Tensor spectral_saliency(const GrayImage& img) {
  const Plane src = to_plane(img);
  Plane acc(img.w, img.h);
  const int scales[] = {64, 32, 16};
  for (int n : scales) {
    const Plane up = resize_plane(spectral_residual(src, n), img.w, img.h);
    for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += up.v[i];
  }
  double mx = 0.0;
  for (double v : acc.v) mx = std::max(mx, v);
  Tensor out{{img.h, img.w}};
  for (std::int64_t i = 0; i < out.size(); ++i)
    out[i] = mx > 0 ? acc.v[static_cast<std::size_t>(i)] / mx : 0.0;
  return out;
}

double ms_score(const GrayImage& img, const BoxI& box) {
  check_box(img, box);
  const Tensor sal = spectral_saliency(img);
  double sum = 0.0;
  for (int y = box.y1; y < box.y2; ++y)
    for (int x = box.x1; x < box.x2; ++x) sum += sal[y * img.w + x];
  return sum / static_cast<double>(box.area());
}

namespace {

constexpr int kHistBins = 32;

std::vector<double> intensity_histogram(const GrayImage& img, int x1, int y1,
                                        int x2, int y2,
                                        const BoxI* exclude) {
  std::vector<double> h(kHistBins, 0.0);
  double n = 0;
  for (int y = y1; y < y2; ++y)
    for (int x = x1; x < x2; ++x) {
      if (exclude && x >= exclude->x1 && x < exclude->x2 && y >= exclude->y1 &&
          y < exclude->y2)
        continue;
      h[static_cast<std::size_t>(img.at(y, x) * kHistBins / 256)] += 1.0;
      n += 1.0;
    }
  if (n > 0)
    for (double& v : h) v /= n;
  return h;
}

}  // namespace

double cc_score(const GrayImage& img, const BoxI& box) {
  check_box(img, box);
  const int dw = box.width() / 2, dh = box.height() / 2;
  const int rx1 = std::max(0, box.x1 - dw), ry1 = std::max(0, box.y1 - dh);
  const int rx2 = std::min(img.w, box.x2 + dw), ry2 = std::min(img.h, box.y2 + dh);
  const bool ring_has_pixels =
      static_cast<std::int64_t>(rx2 - rx1) * (ry2 - ry1) > box.area();
  if (!ring_has_pixels) return 0.0;  // box fills the image: no surround
  const std::vector<double> fg =
      intensity_histogram(img, box.x1, box.y1, box.x2, box.y2, nullptr);
  const std::vector<double> bg = intensity_histogram(img, rx1, ry1, rx2, ry2, &box);
  double chi2 = 0.0;
  for (int i = 0; i < kHistBins; ++i) {
    const double s = fg[static_cast<std::size_t>(i)] + bg[static_cast<std::size_t>(i)];
    if (s > 0) {
      const double d = fg[static_cast<std::size_t>(i)] - bg[static_cast<std::size_t>(i)];
      chi2 += d * d / s;
    }
  }
  return 0.5 * chi2;
}

double ed_score(const GrayImage& img, const BoxI& box) {
  check_box(img, box);
  const Plane p = to_plane(img);
  Plane mag(img.w, img.h);
  double mx = 0.0;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const double gx = p.clamped(y - 1, x + 1) + 2 * p.clamped(y, x + 1) +
                        p.clamped(y + 1, x + 1) - p.clamped(y - 1, x - 1) -
                        2 * p.clamped(y, x - 1) - p.clamped(y + 1, x - 1);
      const double gy = p.clamped(y + 1, x - 1) + 2 * p.clamped(y + 1, x) +
                        p.clamped(y + 1, x + 1) - p.clamped(y - 1, x - 1) -
                        2 * p.clamped(y - 1, x) - p.clamped(y - 1, x + 1);
      mag.at(y, x) = std::sqrt(gx * gx + gy * gy);
      mx = std::max(mx, mag.at(y, x));
    }
  if (mx == 0.0) return 0.0;
  // Ring between the box border and the half-scaled box around its center.
  const int cx1 = box.x1 + box.width() / 4, cx2 = box.x2 - box.width() / 4;
  const int cy1 = box.y1 + box.height() / 4, cy2 = box.y2 - box.height() / 4;
  double sum = 0.0;
  std::int64_t n = 0;
  for (int y = box.y1; y < box.y2; ++y)
    for (int x = box.x1; x < box.x2; ++x) {
      const bool inner = x >= cx1 && x < cx2 && y >= cy1 && y < cy2 &&
                         cx2 > cx1 && cy2 > cy1;
      if (inner) continue;
      sum += mag.at(y, x);
      ++n;
    }
  if (n == 0) {  // degenerate half-box covers everything: use the whole box
    for (int y = box.y1; y < box.y2; ++y)
      for (int x = box.x1; x < box.x2; ++x) {
        sum += mag.at(y, x);
        ++n;
      }
  }
  return sum / (static_cast<double>(n) * mx);
}

namespace {

struct UnionFind {
  std::vector<int> parent, size;

  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)),
                              size(static_cast<std::size_t>(n), 1) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  }
  int unite(int a, int b) {  // returns the surviving root
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (size[static_cast<std::size_t>(a)] < size[static_cast<std::size_t>(b)])
      std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    size[static_cast<std::size_t>(a)] += size[static_cast<std::size_t>(b)];
    return a;
  }
};

struct Edge {
  int a, b;
  double w;
};

}  // namespace

std::vector<int> felzenszwalb_segments(const GrayImage& img, double k,
                                       int min_size) {
  require(k > 0 && min_size >= 1, "segmentation: bad parameters");
  const Plane sm = gaussian_blur(to_plane(img), 0.8, 3);
  const int w = img.w, h = img.h, n = w * h;
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(4) * static_cast<std::size_t>(n));
  auto id = [w](int y, int x) { return y * w + x; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = sm.at(y, x);
      if (x + 1 < w)
        edges.push_back({id(y, x), id(y, x + 1), std::abs(v - sm.at(y, x + 1))});
      if (y + 1 < h)
        edges.push_back({id(y, x), id(y + 1, x), std::abs(v - sm.at(y + 1, x))});
      if (x + 1 < w && y + 1 < h)
        edges.push_back(
            {id(y, x), id(y + 1, x + 1), std::abs(v - sm.at(y + 1, x + 1))});
      if (x > 0 && y + 1 < h)
        edges.push_back(
            {id(y, x), id(y + 1, x - 1), std::abs(v - sm.at(y + 1, x - 1))});
    }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.w != b.w) return a.w < b.w;
    if (a.a != b.a) return a.a < b.a;
    return a.b < b.b;
  });

  UnionFind uf(n);
  std::vector<double> threshold(static_cast<std::size_t>(n), k);
  for (const Edge& e : edges) {
    const int a = uf.find(e.a), b = uf.find(e.b);
    if (a == b) continue;
    if (e.w <= std::min(threshold[static_cast<std::size_t>(a)],
                        threshold[static_cast<std::size_t>(b)])) {
      const int r = uf.unite(a, b);
      threshold[static_cast<std::size_t>(r)] =
          e.w + k / uf.size[static_cast<std::size_t>(r)];
    }
  }
  for (const Edge& e : edges) {
    const int a = uf.find(e.a), b = uf.find(e.b);
    if (a != b && (uf.size[static_cast<std::size_t>(a)] < min_size ||
                   uf.size[static_cast<std::size_t>(b)] < min_size))
      uf.unite(a, b);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  std::vector<int> remap(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = uf.find(i);
    if (remap[static_cast<std::size_t>(r)] < 0)
      remap[static_cast<std::size_t>(r)] = next++;
    labels[static_cast<std::size_t>(i)] = remap[static_cast<std::size_t>(r)];
  }
  return labels;
}

double ss_score(const GrayImage& img, const BoxI& box) {
  check_box(img, box);
  const std::vector<int> labels = felzenszwalb_segments(img, 100.0, 20);
  const int n_labels = 1 + *std::max_element(labels.begin(), labels.end());
  std::vector<std::int64_t> total(static_cast<std::size_t>(n_labels), 0);
  std::vector<std::int64_t> inside(static_cast<std::size_t>(n_labels), 0);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const int l = labels[static_cast<std::size_t>(y * img.w + x)];
      ++total[static_cast<std::size_t>(l)];
      if (x >= box.x1 && x < box.x2 && y >= box.y1 && y < box.y2)
        ++inside[static_cast<std::size_t>(l)];
    }
  double penalty = 0.0;
  for (int l = 0; l < n_labels; ++l) {
    const std::int64_t in = inside[static_cast<std::size_t>(l)];
    const std::int64_t out = total[static_cast<std::size_t>(l)] - in;
    penalty += static_cast<double>(std::min(in, out));
  }
  return std::clamp(1.0 - penalty / static_cast<double>(box.area()), 0.0, 1.0);
}

std::vector<double> hog_descriptor(const GrayImage& img, const BoxI& box) {
  check_box(img, box);
  constexpr int kCell = 8;
  constexpr int kBins = 9;
  require(box.width() >= kCell && box.height() >= kCell,
          "hog: box smaller than one descriptor cell");
  const Plane p = to_plane(img);
  const int nx = box.width() / kCell, ny = box.height() / kCell;
  std::vector<double> cells(static_cast<std::size_t>(nx) *
                            static_cast<std::size_t>(ny) * kBins);
  for (int cy = 0; cy < ny; ++cy)
    for (int cx = 0; cx < nx; ++cx) {
      double* hist = &cells[(static_cast<std::size_t>(cy) *
                                 static_cast<std::size_t>(nx) +
                             static_cast<std::size_t>(cx)) *
                            kBins];
      for (int iy = 0; iy < kCell; ++iy)
        for (int ix = 0; ix < kCell; ++ix) {
          const int y = box.y1 + cy * kCell + iy;
          const int x = box.x1 + cx * kCell + ix;
          const double gx = p.clamped(y, x + 1) - p.clamped(y, x - 1);
          const double gy = p.clamped(y + 1, x) - p.clamped(y - 1, x);
          const double mag = std::sqrt(gx * gx + gy * gy);
          if (mag == 0.0) continue;
          double theta = std::atan2(gy, gx) * 180.0 / kPi;  // (-180, 180]
          if (theta < 0) theta += 180.0;                    // unsigned
          if (theta >= 180.0) theta -= 180.0;
          // Linear vote between the two nearest bin centers (circular).
          const double a = theta / 20.0 - 0.5;
          const int b0 = static_cast<int>(std::floor(a));
          const double f = a - b0;
          hist[((b0 % kBins) + kBins) % kBins] += mag * (1.0 - f);
          hist[(((b0 + 1) % kBins) + kBins) % kBins] += mag * f;
        }
    }

  std::vector<double> out;
  auto push_block = [&](const std::vector<const double*>& parts) {
    double norm2 = 0.0;
    for (const double* part : parts)
      for (int b = 0; b < kBins; ++b) norm2 += part[b] * part[b];
    const double norm = std::sqrt(norm2);
    for (const double* part : parts)
      for (int b = 0; b < kBins; ++b)
        out.push_back(norm > 0 ? part[b] / norm : 0.0);
  };
  auto cell_at = [&](int cy, int cx) {
    return &cells[(static_cast<std::size_t>(cy) * static_cast<std::size_t>(nx) +
                   static_cast<std::size_t>(cx)) *
                  kBins];
  };
  if (nx >= 2 && ny >= 2) {
    for (int cy = 0; cy + 1 < ny; ++cy)
      for (int cx = 0; cx + 1 < nx; ++cx)
        push_block({cell_at(cy, cx), cell_at(cy, cx + 1), cell_at(cy + 1, cx),
                    cell_at(cy + 1, cx + 1)});
  } else {
    for (int cy = 0; cy < ny; ++cy)
      for (int cx = 0; cx < nx; ++cx) push_block({cell_at(cy, cx)});
  }
  return out;
}

ObjectnessScores objectness_scores(const GrayImage& img, const BoxI& box) {
  ObjectnessScores s;
  s.ms = ms_score(img, box);
  s.cc = cc_score(img, box);
  s.ed = ed_score(img, box);
  s.ss = ss_score(img, box);
  s.hog = hog_descriptor(img, box);
  return s;
}

}  // namespace vsflab

#include "vsflab/ops.hpp"

#include <algorithm>
#include <cmath>

namespace vsflab::ops {

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.same_shape(b), std::string(op) + ": shape mismatch " +
                               shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

std::int64_t clamp_i(std::int64_t v, std::int64_t lo, std::int64_t hi) {
  return std::max(lo, std::min(hi, v));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same(a, b, "add");
  Tensor out{a.shape()};
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  out.ensure_finite("add");
  return out;
}

void add_adjoint(const Tensor& gout, Tensor* ga, Tensor* gb) {
  for (std::int64_t i = 0; i < gout.size(); ++i) {
    if (ga) (*ga)[i] += gout[i];
    if (gb) (*gb)[i] += gout[i];
  }
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same(a, b, "sub");
  Tensor out{a.shape()};
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  out.ensure_finite("sub");
  return out;
}

void sub_adjoint(const Tensor& gout, Tensor* ga, Tensor* gb) {
  for (std::int64_t i = 0; i < gout.size(); ++i) {
    if (ga) (*ga)[i] += gout[i];
    if (gb) (*gb)[i] -= gout[i];
  }
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same(a, b, "mul");
  Tensor out{a.shape()};
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  out.ensure_finite("mul");
  return out;
}

void mul_adjoint(const Tensor& a, const Tensor& b, const Tensor& gout, Tensor* ga,
                 Tensor* gb) {
  for (std::int64_t i = 0; i < gout.size(); ++i) {
    if (ga) (*ga)[i] += gout[i] * b[i];
    if (gb) (*gb)[i] += gout[i] * a[i];
  }
}

Tensor scale(const Tensor& a, double k) {
  Tensor out{a.shape()};
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * k;
  out.ensure_finite("scale");
  return out;
}

void scale_adjoint(double k, const Tensor& gout, Tensor* ga) {
  if (!ga) return;
  for (std::int64_t i = 0; i < gout.size(); ++i) (*ga)[i] += gout[i] * k;
}

Tensor relu(const Tensor& a) {
  Tensor out{a.shape()};
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  out.ensure_finite("relu");
  return out;
}

void relu_adjoint(const Tensor& a, const Tensor& gout, Tensor* ga) {
  if (!ga) return;
  for (std::int64_t i = 0; i < gout.size(); ++i)
    if (a[i] > 0.0) (*ga)[i] += gout[i];
}

Tensor sigmoid(const Tensor& a) {
  Tensor out{a.shape()};
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double v = a[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
  out.ensure_finite("sigmoid");
  return out;
}

void sigmoid_adjoint(const Tensor& out, const Tensor& gout, Tensor* ga) {
  if (!ga) return;
  for (std::int64_t i = 0; i < gout.size(); ++i)
    (*ga)[i] += gout[i] * out[i] * (1.0 - out[i]);
}

Tensor smooth_l1(const Tensor& a) {
  Tensor out{a.shape()};
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double v = std::abs(a[i]);
    out[i] = v < 1.0 ? 0.5 * v * v : v - 0.5;
  }
  out.ensure_finite("smooth_l1");
  return out;
}

void smooth_l1_adjoint(const Tensor& a, const Tensor& gout, Tensor* ga) {
  if (!ga) return;
  for (std::int64_t i = 0; i < gout.size(); ++i) {
    const double v = a[i];
    const double d = std::abs(v) < 1.0 ? v : (v > 0.0 ? 1.0 : -1.0);
    (*ga)[i] += gout[i] * d;
  }
}

Tensor binary_cross_entropy(const Tensor& prob, const Tensor& target) {
  check_same(prob, target, "binary_cross_entropy");
  Tensor out{prob.shape()};
  for (std::int64_t i = 0; i < prob.size(); ++i) {
    const double p = std::clamp(prob[i], kProbClamp, 1.0 - kProbClamp);
    const double y = target[i];
    out[i] = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  out.ensure_finite("binary_cross_entropy");
  return out;
}

void binary_cross_entropy_adjoint(const Tensor& prob, const Tensor& target,
                                  const Tensor& gout, Tensor* gprob) {
  if (!gprob) return;
  for (std::int64_t i = 0; i < gout.size(); ++i) {
    const double p = prob[i];
    if (p <= kProbClamp || p >= 1.0 - kProbClamp) continue;
    const double y = target[i];
    (*gprob)[i] += gout[i] * (-y / p + (1.0 - y) / (1.0 - p));
  }
}

namespace {

struct Conv2dDims {
  std::int64_t n, ci, h, w, co, kh, kw, ph, pw, ho, wo;
};

Conv2dDims conv2d_dims(const Tensor& x, const Tensor& w, const Tensor& b,
                       int stride) {
  require(x.rank() == 4 && w.rank() == 4 && b.rank() == 1,
          "conv2d: needs x rank 4, w rank 4, b rank 1");
  Conv2dDims d;
  d.n = x.dim(0), d.ci = x.dim(1), d.h = x.dim(2), d.w = x.dim(3);
  d.co = w.dim(0), d.kh = w.dim(2), d.kw = w.dim(3);
  require(w.dim(1) == d.ci, "conv2d: channel mismatch");
  require(d.kh % 2 == 1 && d.kw % 2 == 1, "conv2d: kernel extents must be odd");
  require(b.dim(0) == d.co, "conv2d: bias size mismatch");
  require(stride >= 1, "conv2d: stride must be >= 1");
  d.ph = d.kh / 2, d.pw = d.kw / 2;
  d.ho = (d.h + 2 * d.ph - d.kh) / stride + 1;
  d.wo = (d.w + 2 * d.pw - d.kw) / stride + 1;
  return d;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  const auto d = conv2d_dims(x, w, b, stride);
  Tensor out{{d.n, d.co, d.ho, d.wo}};
  const double* xp = x.data();
  const double* wp = w.data();
  double* op = out.data();
  for (std::int64_t n = 0; n < d.n; ++n)
    for (std::int64_t co = 0; co < d.co; ++co)
      for (std::int64_t oy = 0; oy < d.ho; ++oy)
        for (std::int64_t ox = 0; ox < d.wo; ++ox) {
          double acc = b[co];
          for (std::int64_t ci = 0; ci < d.ci; ++ci)
            for (std::int64_t ky = 0; ky < d.kh; ++ky) {
              const std::int64_t iy = oy * stride + ky - d.ph;
              if (iy < 0 || iy >= d.h) continue;
              const double* xrow = xp + ((n * d.ci + ci) * d.h + iy) * d.w;
              const double* wrow = wp + ((co * d.ci + ci) * d.kh + ky) * d.kw;
              for (std::int64_t kx = 0; kx < d.kw; ++kx) {
                const std::int64_t ix = ox * stride + kx - d.pw;
                if (ix < 0 || ix >= d.w) continue;
                acc += xrow[ix] * wrow[kx];
              }
            }
          op[((n * d.co + co) * d.ho + oy) * d.wo + ox] = acc;
        }
  out.ensure_finite("conv2d");
  return out;
}

void conv2d_adjoint(const Tensor& x, const Tensor& w, int stride, const Tensor& gout,
                    Tensor* gx, Tensor* gw, Tensor* gb) {
  Tensor dummy_b{{w.dim(0)}};
  const auto d = conv2d_dims(x, w, dummy_b, stride);
  const double* xp = x.data();
  const double* wp = w.data();
  const double* gp = gout.data();
  for (std::int64_t n = 0; n < d.n; ++n)
    for (std::int64_t co = 0; co < d.co; ++co)
      for (std::int64_t oy = 0; oy < d.ho; ++oy)
        for (std::int64_t ox = 0; ox < d.wo; ++ox) {
          const double g = gp[((n * d.co + co) * d.ho + oy) * d.wo + ox];
          if (gb) (*gb)[co] += g;
          if (!gx && !gw) continue;
          for (std::int64_t ci = 0; ci < d.ci; ++ci)
            for (std::int64_t ky = 0; ky < d.kh; ++ky) {
              const std::int64_t iy = oy * stride + ky - d.ph;
              if (iy < 0 || iy >= d.h) continue;
              const std::int64_t xrow = ((n * d.ci + ci) * d.h + iy) * d.w;
              const std::int64_t wrow = ((co * d.ci + ci) * d.kh + ky) * d.kw;
              for (std::int64_t kx = 0; kx < d.kw; ++kx) {
                const std::int64_t ix = ox * stride + kx - d.pw;
                if (ix < 0 || ix >= d.w) continue;
                if (gx) (*gx)[xrow + ix] += g * wp[wrow + kx];
                if (gw) (*gw)[wrow + kx] += g * xp[xrow + ix];
              }
            }
        }
}

namespace {

struct Conv3dDims {
  std::int64_t b, ci, h, w, t, co, kh, kw, kt, ph, pw, pt;
};

Conv3dDims conv3d_dims(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require(x.rank() == 5 && w.rank() == 5 && bias.rank() == 1,
          "conv3d: needs x rank 5, w rank 5, b rank 1");
  Conv3dDims d;
  d.b = x.dim(0), d.ci = x.dim(1), d.h = x.dim(2), d.w = x.dim(3), d.t = x.dim(4);
  d.co = w.dim(0), d.kh = w.dim(2), d.kw = w.dim(3), d.kt = w.dim(4);
  require(w.dim(1) == d.ci, "conv3d: channel mismatch");
  require(d.kh % 2 == 1 && d.kw % 2 == 1 && d.kt % 2 == 1,
          "conv3d: kernel extents must be odd");
  require(bias.dim(0) == d.co, "conv3d: bias size mismatch");
  d.ph = d.kh / 2, d.pw = d.kw / 2, d.pt = d.kt / 2;
  return d;
}

}  // namespace

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b) {
  const auto d = conv3d_dims(x, w, b);
  Tensor out{{d.b, d.co, d.h, d.w, d.t}};
  const double* xp = x.data();
  const double* wp = w.data();
  double* op = out.data();
  for (std::int64_t n = 0; n < d.b; ++n)
    for (std::int64_t co = 0; co < d.co; ++co)
      for (std::int64_t oy = 0; oy < d.h; ++oy)
        for (std::int64_t ox = 0; ox < d.w; ++ox)
          for (std::int64_t ot = 0; ot < d.t; ++ot) {
            double acc = b[co];
            for (std::int64_t ci = 0; ci < d.ci; ++ci)
              for (std::int64_t ky = 0; ky < d.kh; ++ky) {
                const std::int64_t iy = oy + ky - d.ph;
                if (iy < 0 || iy >= d.h) continue;
                for (std::int64_t kx = 0; kx < d.kw; ++kx) {
                  const std::int64_t ix = ox + kx - d.pw;
                  if (ix < 0 || ix >= d.w) continue;
                  const double* xrow =
                      xp + (((n * d.ci + ci) * d.h + iy) * d.w + ix) * d.t;
                  const double* wrow =
                      wp + (((co * d.ci + ci) * d.kh + ky) * d.kw + kx) * d.kt;
                  for (std::int64_t kt = 0; kt < d.kt; ++kt) {
                    const std::int64_t it = ot + kt - d.pt;
                    if (it < 0 || it >= d.t) continue;
                    acc += xrow[it] * wrow[kt];
                  }
                }
              }
            op[(((n * d.co + co) * d.h + oy) * d.w + ox) * d.t + ot] = acc;
          }
  out.ensure_finite("conv3d");
  return out;
}

void conv3d_adjoint(const Tensor& x, const Tensor& w, const Tensor& gout, Tensor* gx,
                    Tensor* gw, Tensor* gb) {
  Tensor dummy_b{{w.dim(0)}};
  const auto d = conv3d_dims(x, w, dummy_b);
  const double* xp = x.data();
  const double* wp = w.data();
  const double* gp = gout.data();
  for (std::int64_t n = 0; n < d.b; ++n)
    for (std::int64_t co = 0; co < d.co; ++co)
      for (std::int64_t oy = 0; oy < d.h; ++oy)
        for (std::int64_t ox = 0; ox < d.w; ++ox)
          for (std::int64_t ot = 0; ot < d.t; ++ot) {
            const double g = gp[(((n * d.co + co) * d.h + oy) * d.w + ox) * d.t + ot];
            if (gb) (*gb)[co] += g;
            if (!gx && !gw) continue;
            for (std::int64_t ci = 0; ci < d.ci; ++ci)
              for (std::int64_t ky = 0; ky < d.kh; ++ky) {
                const std::int64_t iy = oy + ky - d.ph;
                if (iy < 0 || iy >= d.h) continue;
                for (std::int64_t kx = 0; kx < d.kw; ++kx) {
                  const std::int64_t ix = ox + kx - d.pw;
                  if (ix < 0 || ix >= d.w) continue;
                  const std::int64_t xrow =
                      (((n * d.ci + ci) * d.h + iy) * d.w + ix) * d.t;
                  const std::int64_t wrow =
                      (((co * d.ci + ci) * d.kh + ky) * d.kw + kx) * d.kt;
                  for (std::int64_t kt = 0; kt < d.kt; ++kt) {
                    const std::int64_t it = ot + kt - d.pt;
                    if (it < 0 || it >= d.t) continue;
                    if (gx) (*gx)[xrow + it] += g * wp[wrow + kt];
                    if (gw) (*gw)[wrow + kt] += g * xp[xrow + it];
                  }
                }
              }
          }
}

Tensor global_avg_pool(const Tensor& x) {
  require(x.rank() >= 3, "global_avg_pool: needs rank >= 3");
  const std::int64_t b = x.dim(0), c = x.dim(1);
  const std::int64_t inner = x.size() / (b * c);
  Tensor out{{b, c}};
  for (std::int64_t bc = 0; bc < b * c; ++bc) {
    double acc = 0.0;
    const double* p = x.data() + bc * inner;
    for (std::int64_t i = 0; i < inner; ++i) acc += p[i];
    out[bc] = acc / static_cast<double>(inner);
  }
  out.ensure_finite("global_avg_pool");
  return out;
}

void global_avg_pool_adjoint(const Shape& x_shape, const Tensor& gout, Tensor* gx) {
  if (!gx) return;
  const std::int64_t b = x_shape[0], c = x_shape[1];
  const std::int64_t inner = shape_numel(x_shape) / (b * c);
  const double inv = 1.0 / static_cast<double>(inner);
  for (std::int64_t bc = 0; bc < b * c; ++bc) {
    const double g = gout[bc] * inv;
    double* p = gx->data() + bc * inner;
    for (std::int64_t i = 0; i < inner; ++i) p[i] += g;
  }
}

Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 2 && w.rank() == 2 && b.rank() == 1,
          "fully_connected: needs x rank 2, w rank 2, b rank 1");
  const std::int64_t n = x.dim(0), ci = x.dim(1), co = w.dim(0);
  require(w.dim(1) == ci && b.dim(0) == co, "fully_connected: shape mismatch");
  Tensor out{{n, co}};
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t o = 0; o < co; ++o) {
      double acc = b[o];
      const double* xr = x.data() + r * ci;
      const double* wr = w.data() + o * ci;
      for (std::int64_t i = 0; i < ci; ++i) acc += xr[i] * wr[i];
      out[r * co + o] = acc;
    }
  out.ensure_finite("fully_connected");
  return out;
}

void fully_connected_adjoint(const Tensor& x, const Tensor& w, const Tensor& gout,
                             Tensor* gx, Tensor* gw, Tensor* gb) {
  const std::int64_t n = x.dim(0), ci = x.dim(1), co = w.dim(0);
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t o = 0; o < co; ++o) {
      const double g = gout[r * co + o];
      if (gb) (*gb)[o] += g;
      for (std::int64_t i = 0; i < ci; ++i) {
        if (gx) (*gx)[r * ci + i] += g * w[o * ci + i];
        if (gw) (*gw)[o * ci + i] += g * x[r * ci + i];
      }
    }
}

Tensor split_frames(const Tensor& x, std::int64_t t_frames) {
  require(x.rank() == 4, "split_frames: needs rank 4");
  require(t_frames >= 1 && x.dim(0) % t_frames == 0,
          "split_frames: leading extent not divisible by frame count");
  const std::int64_t b = x.dim(0) / t_frames, c = x.dim(1), h = x.dim(2),
                     w = x.dim(3);
  Tensor out{{b, c, h, w, t_frames}};
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t t = 0; t < t_frames; ++t)
      for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t xx = 0; xx < w; ++xx)
            out[(((n * c + ch) * h + y) * w + xx) * t_frames + t] =
                x[(((n * t_frames + t) * c + ch) * h + y) * w + xx];
  return out;
}

void split_frames_adjoint(std::int64_t t_frames, const Tensor& gout, Tensor* gx) {
  if (!gx) return;
  const std::int64_t b = gout.dim(0), c = gout.dim(1), h = gout.dim(2),
                     w = gout.dim(3);
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t t = 0; t < t_frames; ++t)
      for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t xx = 0; xx < w; ++xx)
            (*gx)[(((n * t_frames + t) * c + ch) * h + y) * w + xx] +=
                gout[(((n * c + ch) * h + y) * w + xx) * t_frames + t];
}

Tensor merge_frames(const Tensor& x) {
  require(x.rank() == 5, "merge_frames: needs rank 5");
  const std::int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3),
                     t_frames = x.dim(4);
  Tensor out{{b * t_frames, c, h, w}};
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t t = 0; t < t_frames; ++t)
      for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t xx = 0; xx < w; ++xx)
            out[(((n * t_frames + t) * c + ch) * h + y) * w + xx] =
                x[(((n * c + ch) * h + y) * w + xx) * t_frames + t];
  return out;
}

void merge_frames_adjoint(const Shape& x_shape, const Tensor& gout, Tensor* gx) {
  if (!gx) return;
  const std::int64_t b = x_shape[0], c = x_shape[1], h = x_shape[2], w = x_shape[3],
                     t_frames = x_shape[4];
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t t = 0; t < t_frames; ++t)
      for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t xx = 0; xx < w; ++xx)
            (*gx)[(((n * c + ch) * h + y) * w + xx) * t_frames + t] +=
                gout[(((n * t_frames + t) * c + ch) * h + y) * w + xx];
}

Tensor frames_to_channels(const Tensor& x, std::int64_t t_frames) {
  require(x.rank() == 4, "frames_to_channels: needs rank 4");
  require(t_frames >= 1 && x.dim(0) % t_frames == 0,
          "frames_to_channels: leading extent not divisible by frame count");
  const std::int64_t b = x.dim(0) / t_frames, c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out{{b, t_frames * c, x.dim(2), x.dim(3)}};
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t t = 0; t < t_frames; ++t)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double* src = x.data() + ((n * t_frames + t) * c + ch) * hw;
        double* dst = out.data() + (n * t_frames * c + t * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) dst[i] = src[i];
      }
  return out;
}

void frames_to_channels_adjoint(std::int64_t t_frames, const Tensor& gout,
                                Tensor* gx) {
  if (!gx) return;
  const std::int64_t b = gout.dim(0), tc = gout.dim(1),
                     hw = gout.dim(2) * gout.dim(3);
  const std::int64_t c = tc / t_frames;
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t t = 0; t < t_frames; ++t)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double* src = gout.data() + (n * tc + t * c + ch) * hw;
        double* dst = gx->data() + ((n * t_frames + t) * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) dst[i] += src[i];
      }
}

Tensor channels_last(const Tensor& x) {
  require(x.rank() == 4, "channels_last: needs rank 4");
  const std::int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out{{b, h, w, c}};
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t xx = 0; xx < w; ++xx)
          out[((n * h + y) * w + xx) * c + ch] = x[((n * c + ch) * h + y) * w + xx];
  return out;
}

void channels_last_adjoint(const Shape& x_shape, const Tensor& gout, Tensor* gx) {
  if (!gx) return;
  const std::int64_t b = x_shape[0], c = x_shape[1], h = x_shape[2], w = x_shape[3];
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t xx = 0; xx < w; ++xx)
          (*gx)[((n * c + ch) * h + y) * w + xx] +=
              gout[((n * h + y) * w + xx) * c + ch];
}

Tensor channel_scale(const Tensor& x, const Tensor& gate) {
  require(x.rank() >= 2 && gate.rank() == 2, "channel_scale: bad ranks");
  const std::int64_t b = x.dim(0), c = x.dim(1);
  require(gate.dim(0) == b && gate.dim(1) == c, "channel_scale: gate shape mismatch");
  const std::int64_t inner = x.size() / (b * c);
  Tensor out{x.shape()};
  for (std::int64_t bc = 0; bc < b * c; ++bc) {
    const double g = gate[bc];
    const double* src = x.data() + bc * inner;
    double* dst = out.data() + bc * inner;
    for (std::int64_t i = 0; i < inner; ++i) dst[i] = src[i] * g;
  }
  out.ensure_finite("channel_scale");
  return out;
}

void channel_scale_adjoint(const Tensor& x, const Tensor& gate, const Tensor& gout,
                           Tensor* gx, Tensor* ggate) {
  const std::int64_t b = x.dim(0), c = x.dim(1);
  const std::int64_t inner = x.size() / (b * c);
  for (std::int64_t bc = 0; bc < b * c; ++bc) {
    const double g = gate[bc];
    const double* xs = x.data() + bc * inner;
    const double* gs = gout.data() + bc * inner;
    double acc = 0.0;
    for (std::int64_t i = 0; i < inner; ++i) {
      if (gx) (*gx)[bc * inner + i] += gs[i] * g;
      acc += gs[i] * xs[i];
    }
    if (ggate) (*ggate)[bc] += acc;
  }
}

Tensor gather_rows(const Tensor& x, const std::vector<std::int64_t>& idx) {
  require(x.rank() == 2, "gather_rows: needs rank 2");
  require(!idx.empty(), "gather_rows: empty index list");
  const std::int64_t n = x.dim(0), d = x.dim(1);
  Tensor out{{static_cast<std::int64_t>(idx.size()), d}};
  for (std::size_t k = 0; k < idx.size(); ++k) {
    require(idx[k] >= 0 && idx[k] < n, "gather_rows: index out of range");
    const double* src = x.data() + idx[k] * d;
    double* dst = out.data() + static_cast<std::int64_t>(k) * d;
    for (std::int64_t i = 0; i < d; ++i) dst[i] = src[i];
  }
  return out;
}

void gather_rows_adjoint(const std::vector<std::int64_t>& idx, const Tensor& gout,
                         Tensor* gx) {
  if (!gx) return;
  const std::int64_t d = gout.dim(1);
  for (std::size_t k = 0; k < idx.size(); ++k)
    for (std::int64_t i = 0; i < d; ++i)
      (*gx)[idx[k] * d + i] += gout[static_cast<std::int64_t>(k) * d + i];
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i];
  Tensor out{{1}};
  out[0] = acc;
  out.ensure_finite("sum_all");
  return out;
}

void sum_all_adjoint(const Shape&, const Tensor& gout, Tensor* gx) {
  if (!gx) return;
  const double g = gout[0];
  for (std::int64_t i = 0; i < gx->size(); ++i) (*gx)[i] += g;
}

namespace {

struct BinRange {
  std::int64_t lo, hi;  // half-open cell range, hi > lo
};

// Cell coverage of pooling bin k of `bins` over [c1, c2) clipped to [0, extent).
// Degenerate or fully clipped boxes collapse to the nearest single cell.
BinRange bin_range(double c1, double c2, std::int64_t k, std::int64_t bins,
                   std::int64_t extent) {
  const double lo = std::max(0.0, std::min(c1, static_cast<double>(extent)));
  const double hi = std::max(0.0, std::min(c2, static_cast<double>(extent)));
  const double bw = (hi - lo) / static_cast<double>(bins);
  const double start = lo + bw * static_cast<double>(k);
  BinRange r;
  r.lo = clamp_i(static_cast<std::int64_t>(std::floor(start)), 0, extent - 1);
  r.hi = clamp_i(static_cast<std::int64_t>(std::ceil(start + bw)), r.lo + 1, extent);
  return r;
}

}  // namespace

Tensor roi_avg_pool(const Tensor& x, const std::vector<RoiBox>& boxes, int bins) {
  require(x.rank() == 4, "roi_avg_pool: needs rank 4");
  require(bins >= 1, "roi_avg_pool: bins must be >= 1");
  require(!boxes.empty(), "roi_avg_pool: no boxes");
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t pp = static_cast<std::int64_t>(bins) * bins;
  Tensor out{{static_cast<std::int64_t>(boxes.size()), c * pp}};
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const RoiBox& bx = boxes[k];
    require(bx.n >= 0 && bx.n < n, "roi_avg_pool: batch index out of range");
    for (std::int64_t py = 0; py < bins; ++py) {
      const BinRange ry = bin_range(bx.y1, bx.y2, py, bins, h);
      for (std::int64_t px = 0; px < bins; ++px) {
        const BinRange rx = bin_range(bx.x1, bx.x2, px, bins, w);
        const double inv =
            1.0 / static_cast<double>((ry.hi - ry.lo) * (rx.hi - rx.lo));
        for (std::int64_t ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (std::int64_t y = ry.lo; y < ry.hi; ++y) {
            const double* row = x.data() + ((bx.n * c + ch) * h + y) * w;
            for (std::int64_t xx = rx.lo; xx < rx.hi; ++xx) acc += row[xx];
          }
          out[static_cast<std::int64_t>(k) * c * pp + ch * pp + py * bins + px] =
              acc * inv;
        }
      }
    }
  }
  out.ensure_finite("roi_avg_pool");
  return out;
}

void roi_avg_pool_adjoint(const Tensor& x, const std::vector<RoiBox>& boxes, int bins,
                          const Tensor& gout, Tensor* gx) {
  if (!gx) return;
  const std::int64_t c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t pp = static_cast<std::int64_t>(bins) * bins;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const RoiBox& bx = boxes[k];
    for (std::int64_t py = 0; py < bins; ++py) {
      const BinRange ry = bin_range(bx.y1, bx.y2, py, bins, h);
      for (std::int64_t px = 0; px < bins; ++px) {
        const BinRange rx = bin_range(bx.x1, bx.x2, px, bins, w);
        const double inv =
            1.0 / static_cast<double>((ry.hi - ry.lo) * (rx.hi - rx.lo));
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const double g =
              gout[static_cast<std::int64_t>(k) * c * pp + ch * pp + py * bins + px] *
              inv;
          for (std::int64_t y = ry.lo; y < ry.hi; ++y)
            for (std::int64_t xx = rx.lo; xx < rx.hi; ++xx)
              (*gx)[((bx.n * c + ch) * h + y) * w + xx] += g;
        }
      }
    }
  }
}

}  // namespace vsflab::ops

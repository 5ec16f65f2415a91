#include "vsflab/vsf.hpp"

#include <cmath>

namespace vsflab {

double bias_data(int channel, int t, int t_frames) {
  require(channel >= 0 && channel <= 2, "bias_data: channel must be 0, 1 or 2");
  require(t_frames >= 1 && t >= 0 && t < t_frames, "bias_data: frame out of range");
  if (channel == 0) return t == 0 ? t_frames - 1.0 : -1.0;
  if (channel == 1) return 0.0;
  return t == t_frames - 1 ? 1.0 - t_frames : 1.0;
}

double bias_fea(int channel, int channels) {
  require(channels >= 8 && channels % 8 == 0,
          "bias_fea: channel count must be a positive multiple of 8");
  require(channel >= 0 && channel < channels, "bias_fea: channel out of range");
  switch (channel / (channels / 8)) {
    case 0: return -2.0;
    case 1: return -1.0;
    case 2: return 1.0;
    case 3: return 2.0;
    default: return 0.0;
  }
}

double schedule_bias(ShiftSchedule sch, int channel, int channels, int t,
                     int t_frames) {
  switch (sch) {
    case ShiftSchedule::none: return 0.0;
    case ShiftSchedule::data:
      require(channels == 3, "data schedule expects exactly 3 channels");
      return bias_data(channel, t, t_frames);
    case ShiftSchedule::feature: return bias_fea(channel, channels);
  }
  fail("schedule_bias: bad schedule");
}

namespace {

// Trilinear read of vol(sy, sx, st) with zero outside [0, extent-1]. Exact
// integer coordinates take the direct-fetch path, which keeps integer-offset
// shifts bit-identical to index arithmetic.
double sample_shift(const double* vol, std::int64_t h, std::int64_t w,
                    std::int64_t t_frames, double sy, double sx, double st) {
  const double fy = std::floor(sy), fx = std::floor(sx), ft = std::floor(st);
  const std::int64_t y0 = static_cast<std::int64_t>(fy);
  const std::int64_t x0 = static_cast<std::int64_t>(fx);
  const std::int64_t t0 = static_cast<std::int64_t>(ft);
  if (sy == fy && sx == fx && st == ft) {
    if (y0 < 0 || y0 >= h || x0 < 0 || x0 >= w || t0 < 0 || t0 >= t_frames)
      return 0.0;
    return vol[(y0 * w + x0) * t_frames + t0];
  }
  const double wy1 = sy - fy, wx1 = sx - fx, wt1 = st - ft;
  double acc = 0.0;
  for (int a = 0; a <= 1; ++a) {
    const std::int64_t y = y0 + a;
    if (y < 0 || y >= h) continue;
    const double wy = a ? wy1 : 1.0 - wy1;
    for (int b = 0; b <= 1; ++b) {
      const std::int64_t x = x0 + b;
      if (x < 0 || x >= w) continue;
      const double wx = b ? wx1 : 1.0 - wx1;
      for (int c = 0; c <= 1; ++c) {
        const std::int64_t tt = t0 + c;
        if (tt < 0 || tt >= t_frames) continue;
        const double wt = c ? wt1 : 1.0 - wt1;
        acc += wy * wx * wt * vol[(y * w + x) * t_frames + tt];
      }
    }
  }
  return acc;
}

// Gradient of sample_shift: scatters d(out) into the volume and accumulates
// d(out)/d(dx,dy,dt). The derivative uses the floor-cell decomposition, which
// at exact integer coordinates is the forward-difference subgradient.
void sample_shift_adjoint(const double* vol, std::int64_t h, std::int64_t w,
                          std::int64_t t_frames, double sy, double sx, double st,
                          double g, double* gvol, double* gdx, double* gdy,
                          double* gdt) {
  const double fy = std::floor(sy), fx = std::floor(sx), ft = std::floor(st);
  const std::int64_t y0 = static_cast<std::int64_t>(fy);
  const std::int64_t x0 = static_cast<std::int64_t>(fx);
  const std::int64_t t0 = static_cast<std::int64_t>(ft);
  const double wy1 = sy - fy, wx1 = sx - fx, wt1 = st - ft;
  for (int a = 0; a <= 1; ++a) {
    const std::int64_t y = y0 + a;
    const bool yin = y >= 0 && y < h;
    const double wy = a ? wy1 : 1.0 - wy1;
    const double dy_sign = a ? 1.0 : -1.0;
    for (int b = 0; b <= 1; ++b) {
      const std::int64_t x = x0 + b;
      const bool xin = x >= 0 && x < w;
      const double wx = b ? wx1 : 1.0 - wx1;
      const double dx_sign = b ? 1.0 : -1.0;
      for (int c = 0; c <= 1; ++c) {
        const std::int64_t tt = t0 + c;
        if (!yin || !xin || tt < 0 || tt >= t_frames) continue;
        const double wt = c ? wt1 : 1.0 - wt1;
        const double dt_sign = c ? 1.0 : -1.0;
        const std::int64_t at = (y * w + x) * t_frames + tt;
        if (gvol) gvol[at] += g * wy * wx * wt;
        const double v = vol[at];
        if (gdx) *gdx += g * wy * wt * dx_sign * v;
        if (gdy) *gdy += g * wx * wt * dy_sign * v;
        if (gdt) *gdt += g * wy * wx * dt_sign * v;
      }
    }
  }
}

}  // namespace

Tensor vsf_shift(const Tensor& vol, const OffsetField& field) {
  require(vol.rank() == 3, "vsf_shift: volume must be rank 3");
  const std::int64_t h = vol.dim(0), w = vol.dim(1), t_frames = vol.dim(2);
  require(field.values.rank() == 4 && field.values.dim(0) == h &&
              field.values.dim(1) == w && field.values.dim(2) == t_frames &&
              field.values.dim(3) == 3,
          "vsf_shift: offset field shape mismatch");
  Tensor out{vol.shape()};
  const double* vp = vol.data();
  const double* op = field.values.data();
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t t = 0; t < t_frames; ++t) {
        const std::int64_t at = (y * w + x) * t_frames + t;
        const double dx = op[at * 3 + 0], dy = op[at * 3 + 1], dt = op[at * 3 + 2];
        out[at] = sample_shift(vp, h, w, t_frames, y + dy, x + dx, t + dt);
      }
  out.ensure_finite("vsf_shift");
  return out;
}

void vsf_shift_adjoint(const Tensor& vol, const OffsetField& field,
                       const Tensor& gout, Tensor* gvol, Tensor* gfield) {
  const std::int64_t h = vol.dim(0), w = vol.dim(1), t_frames = vol.dim(2);
  const double* vp = vol.data();
  const double* op = field.values.data();
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t t = 0; t < t_frames; ++t) {
        const std::int64_t at = (y * w + x) * t_frames + t;
        const double dx = op[at * 3 + 0], dy = op[at * 3 + 1], dt = op[at * 3 + 2];
        double gdx = 0.0, gdy = 0.0, gdt = 0.0;
        sample_shift_adjoint(vp, h, w, t_frames, y + dy, x + dx, t + dt, gout[at],
                             gvol ? gvol->data() : nullptr, &gdx, &gdy, &gdt);
        if (gfield) {
          (*gfield)[at * 3 + 0] += gdx;
          (*gfield)[at * 3 + 1] += gdy;
          (*gfield)[at * 3 + 2] += gdt;
        }
      }
}

namespace {

void check_shift_all(const Tensor& f, const Tensor* conv_offsets) {
  require(f.rank() == 5, "vsf_shift_all: features must be rank 5");
  if (conv_offsets) {
    require(conv_offsets->rank() == 5 && conv_offsets->dim(0) == f.dim(0) &&
                conv_offsets->dim(1) == 3 && conv_offsets->dim(2) == f.dim(2) &&
                conv_offsets->dim(3) == f.dim(3) &&
                conv_offsets->dim(4) == f.dim(4),
            "vsf_shift_all: offset tensor shape mismatch");
  }
}

}  // namespace

Tensor vsf_shift_all(const Tensor& f, const Tensor* conv_offsets,
                     ShiftSchedule sch) {
  check_shift_all(f, conv_offsets);
  const std::int64_t bsz = f.dim(0), ch = f.dim(1), h = f.dim(2), w = f.dim(3),
                     t_frames = f.dim(4);
  const std::int64_t vox = h * w * t_frames;
  Tensor out{f.shape()};
  for (std::int64_t b = 0; b < bsz; ++b) {
    const double* oc = conv_offsets ? conv_offsets->data() + b * 3 * vox : nullptr;
    for (std::int64_t c = 0; c < ch; ++c) {
      const double* vol = f.data() + (b * ch + c) * vox;
      double* dst = out.data() + (b * ch + c) * vox;
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
          for (std::int64_t t = 0; t < t_frames; ++t) {
            const std::int64_t at = (y * w + x) * t_frames + t;
            const double dx = oc ? oc[at] : 0.0;
            const double dy = oc ? oc[vox + at] : 0.0;
            double dt = oc ? oc[2 * vox + at] : 0.0;
            dt += schedule_bias(sch, static_cast<int>(c), static_cast<int>(ch),
                                static_cast<int>(t), static_cast<int>(t_frames));
            dst[at] = sample_shift(vol, h, w, t_frames, y + dy, x + dx, t + dt);
          }
    }
  }
  out.ensure_finite("vsf_shift_all");
  return out;
}

void vsf_shift_all_adjoint(const Tensor& f, const Tensor* conv_offsets,
                           ShiftSchedule sch, const Tensor& gout, Tensor* gf,
                           Tensor* gconv_offsets) {
  check_shift_all(f, conv_offsets);
  const std::int64_t bsz = f.dim(0), ch = f.dim(1), h = f.dim(2), w = f.dim(3),
                     t_frames = f.dim(4);
  const std::int64_t vox = h * w * t_frames;
  for (std::int64_t b = 0; b < bsz; ++b) {
    const double* oc = conv_offsets ? conv_offsets->data() + b * 3 * vox : nullptr;
    double* goc = gconv_offsets ? gconv_offsets->data() + b * 3 * vox : nullptr;
    for (std::int64_t c = 0; c < ch; ++c) {
      const double* vol = f.data() + (b * ch + c) * vox;
      double* gvol = gf ? gf->data() + (b * ch + c) * vox : nullptr;
      const double* g = gout.data() + (b * ch + c) * vox;
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
          for (std::int64_t t = 0; t < t_frames; ++t) {
            const std::int64_t at = (y * w + x) * t_frames + t;
            const double dx = oc ? oc[at] : 0.0;
            const double dy = oc ? oc[vox + at] : 0.0;
            double dt = oc ? oc[2 * vox + at] : 0.0;
            dt += schedule_bias(sch, static_cast<int>(c), static_cast<int>(ch),
                                static_cast<int>(t), static_cast<int>(t_frames));
            double gdx = 0.0, gdy = 0.0, gdt = 0.0;
            sample_shift_adjoint(vol, h, w, t_frames, y + dy, x + dx, t + dt, g[at],
                                 gvol, &gdx, &gdy, &gdt);
            if (goc) {
              goc[at] += gdx;
              goc[vox + at] += gdy;
              goc[2 * vox + at] += gdt;
            }
          }
    }
  }
}

Tensor predict_offsets(const Tensor& f, const Tensor& conv_w, const Tensor& conv_b) {
  require(conv_w.dim(0) == 3, "predict_offsets: conv must produce 3 channels");
  return ops::conv3d(f, conv_w, conv_b);
}

OffsetField offset_field_for(const Tensor* conv_offsets, std::int64_t b,
                             int channel, int channels, ShiftSchedule sch,
                             std::int64_t h, std::int64_t w,
                             std::int64_t t_frames) {
  OffsetField field;
  field.values = Tensor{{h, w, t_frames, 3}};
  const std::int64_t vox = h * w * t_frames;
  const double* oc = conv_offsets ? conv_offsets->data() + b * 3 * vox : nullptr;
  for (std::int64_t i = 0; i < vox; ++i) {
    const std::int64_t t = i % t_frames;
    field.values[i * 3 + 0] = oc ? oc[i] : 0.0;
    field.values[i * 3 + 1] = oc ? oc[vox + i] : 0.0;
    field.values[i * 3 + 2] =
        (oc ? oc[2 * vox + i] : 0.0) +
        schedule_bias(sch, channel, channels, static_cast<int>(t),
                      static_cast<int>(t_frames));
  }
  return field;
}

namespace ag {

Var vsf_shift_all(Tape& tp, Var f, Var conv_offsets, ShiftSchedule sch) {
  const Tensor* oc = conv_offsets.valid() ? &tp.val(conv_offsets) : nullptr;
  Tensor out = vsflab::vsf_shift_all(tp.val(f), oc, sch);
  std::vector<Var> parents{f};
  if (conv_offsets.valid()) parents.push_back(conv_offsets);
  return tp.record(std::move(out), parents,
                   [f, conv_offsets, sch](Tape& t, const Tensor& g) {
                     const Tensor* oc2 =
                         conv_offsets.valid() ? &t.val(conv_offsets) : nullptr;
                     Tensor* goc =
                         conv_offsets.valid() ? t.grad_sink(conv_offsets) : nullptr;
                     vsf_shift_all_adjoint(t.val(f), oc2, sch, g, t.grad_sink(f),
                                           goc);
                   });
}

Var differential_attention_fuse(Tape& tp, Var shifted, Var orig, Var fc_w,
                                Var fc_b) {
  Var diff = sub(tp, shifted, orig);
  Var pooled = global_avg_pool(tp, diff);
  Var gate = sigmoid(tp, fully_connected(tp, pooled, fc_w, fc_b));
  Var scaled = channel_scale(tp, orig, gate);
  return add(tp, shifted, scaled);
}

Var vsf_block(Tape& tp, Var x, std::int64_t t_frames, ShiftSchedule sch,
              const VsfBlockParams& params) {
  Var f = split_frames(tp, x, t_frames);
  Var conv_offsets;
  if (params.conv_w.valid())
    conv_offsets = conv3d(tp, f, params.conv_w, params.conv_b);
  Var shifted = vsf_shift_all(tp, f, conv_offsets, sch);
  Var fused = params.fc_w.valid()
                  ? differential_attention_fuse(tp, shifted, f, params.fc_w,
                                                params.fc_b)
                  : shifted;
  return merge_frames(tp, fused);
}

}  // namespace ag

}  // namespace vsflab

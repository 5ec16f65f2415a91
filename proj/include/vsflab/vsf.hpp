#pragma once

#include <cstdint>

#include "vsflab/autograd.hpp"
#include "vsflab/tensor.hpp"

namespace vsflab {

// Fixed temporal shift schedules. `data` expects exactly 3 channels and
// rolls them to the previous/current/next frame; `feature` shifts channel
// groups of C/8 by -2, -1, +1, +2 and leaves the top half in place.
enum class ShiftSchedule { none, data, feature };

// Schedule bias added to the temporal offset component.
double bias_data(int channel, int t, int t_frames);
double bias_fea(int channel, int channels);
double schedule_bias(ShiftSchedule sch, int channel, int channels, int t,
                     int t_frames);

// Per-voxel displacement of one (H,W,T) volume; trailing axis is (dx,dy,dt).
struct OffsetField {
  Tensor values;  // (H,W,T,3)
};

// out(y,x,t) = vol(y + dy, x + dx, t + dt), trilinearly interpolated from the
// 8 surrounding samples; corners outside [0, extent-1] contribute zero. When
// all three shifted coordinates are exact integers the value is fetched
// directly, so an all-zero field is a bit-exact identity.
Tensor vsf_shift(const Tensor& vol, const OffsetField& field);
void vsf_shift_adjoint(const Tensor& vol, const OffsetField& field,
                       const Tensor& gout, Tensor* gvol, Tensor* gfield);

// Batched shift of (B,C,H,W,T). Per (batch, channel) the offset at a voxel is
// conv_offsets(b, :, y, x, t) plus (0, 0, schedule bias); conv_offsets may be
// null (schedule only).
Tensor vsf_shift_all(const Tensor& f, const Tensor* conv_offsets,
                     ShiftSchedule sch);
void vsf_shift_all_adjoint(const Tensor& f, const Tensor* conv_offsets,
                           ShiftSchedule sch, const Tensor& gout, Tensor* gf,
                           Tensor* gconv_offsets);

// Learnable offset prediction: a 3-output conv3d over the feature volume.
Tensor predict_offsets(const Tensor& f, const Tensor& conv_w, const Tensor& conv_b);

// The full offset field seen by one (batch, channel) volume.
OffsetField offset_field_for(const Tensor* conv_offsets, std::int64_t b,
                             int channel, int channels, ShiftSchedule sch,
                             std::int64_t h, std::int64_t w, std::int64_t t_frames);

namespace ag {

// Tape op over (B,C,H,W,T) features; conv_offsets may be invalid (no conv term).
Var vsf_shift_all(Tape& tp, Var f, Var conv_offsets, ShiftSchedule sch);

// shifted + sigmoid(FC(GAP(shifted - orig))) * orig, per (batch, channel).
Var differential_attention_fuse(Tape& tp, Var shifted, Var orig, Var fc_w,
                                Var fc_b);

// One block over frame-major maps (B*T,C,H,W): regroup to a time-trailing
// volume, shift (with predicted offsets and fuse when parameters are given),
// regroup back.
struct VsfBlockParams {
  Var conv_w, conv_b;  // offset conv; invalid => schedule only
  Var fc_w, fc_b;      // fuse gate; invalid => no fuse
};
Var vsf_block(Tape& tp, Var x, std::int64_t t_frames, ShiftSchedule sch,
              const VsfBlockParams& params);

}  // namespace ag

}  // namespace vsflab

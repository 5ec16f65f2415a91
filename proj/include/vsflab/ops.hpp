#pragma once

#include <cstdint>
#include <vector>

#include "vsflab/tensor.hpp"

// Dense kernels, each a (forward, adjoint) pair. Adjoints accumulate into
// the provided gradient tensors (pre-shaped like the primals; null skips that
// input). Every forward output is checked finite. Reductions run serially in
// flat row-major order; results are bit-deterministic.
namespace vsflab::ops {

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
void add_adjoint(const Tensor& gout, Tensor* ga, Tensor* gb);
Tensor sub(const Tensor& a, const Tensor& b);
void sub_adjoint(const Tensor& gout, Tensor* ga, Tensor* gb);
Tensor mul(const Tensor& a, const Tensor& b);
void mul_adjoint(const Tensor& a, const Tensor& b, const Tensor& gout, Tensor* ga,
                 Tensor* gb);
Tensor scale(const Tensor& a, double k);
void scale_adjoint(double k, const Tensor& gout, Tensor* ga);
Tensor relu(const Tensor& a);
void relu_adjoint(const Tensor& a, const Tensor& gout, Tensor* ga);
Tensor sigmoid(const Tensor& a);
void sigmoid_adjoint(const Tensor& out, const Tensor& gout, Tensor* ga);

// Huber-style penalty: 0.5*x^2 for |x| < 1, |x| - 0.5 beyond.
Tensor smooth_l1(const Tensor& a);
void smooth_l1_adjoint(const Tensor& a, const Tensor& gout, Tensor* ga);

// Cross-entropy of probabilities vs {0,1} targets, elementwise. Inputs are
// clamped to [kProbClamp, 1 - kProbClamp]; the gradient is zero in the
// clamped region.
inline constexpr double kProbClamp = 1e-7;
Tensor binary_cross_entropy(const Tensor& prob, const Tensor& target);
void binary_cross_entropy_adjoint(const Tensor& prob, const Tensor& target,
                                  const Tensor& gout, Tensor* gprob);

// conv2d: x (N,Ci,H,W), w (Co,Ci,kh,kw) with odd kh/kw, b (Co). Zero padding
// kh/2 x kw/2, so stride 1 preserves the spatial extents and stride 2 halves
// even ones.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride);
void conv2d_adjoint(const Tensor& x, const Tensor& w, int stride, const Tensor& gout,
                    Tensor* gx, Tensor* gw, Tensor* gb);

// conv3d: x (B,Ci,H,W,T), w (Co,Ci,kh,kw,kt) with odd extents, b (Co).
// Stride 1, zero padding preserving all three sampled extents.
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b);
void conv3d_adjoint(const Tensor& x, const Tensor& w, const Tensor& gout, Tensor* gx,
                    Tensor* gw, Tensor* gb);

// Mean over all trailing axes: (B,C,...) -> (B,C).
Tensor global_avg_pool(const Tensor& x);
void global_avg_pool_adjoint(const Shape& x_shape, const Tensor& gout, Tensor* gx);

// x (N,Ci), w (Co,Ci), b (Co) -> (N,Co).
Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b);
void fully_connected_adjoint(const Tensor& x, const Tensor& w, const Tensor& gout,
                             Tensor* gx, Tensor* gw, Tensor* gb);

// (B*T,C,H,W) -> (B,C,H,W,T) and back. A data permutation, not a view:
// frame-major rows become a trailing time axis.
Tensor split_frames(const Tensor& x, std::int64_t t_frames);
void split_frames_adjoint(std::int64_t t_frames, const Tensor& gout, Tensor* gx);
Tensor merge_frames(const Tensor& x);
void merge_frames_adjoint(const Shape& x_shape, const Tensor& gout, Tensor* gx);

// (B*T,C,H,W) -> (B,T*C,H,W): per-frame channel blocks side by side.
Tensor frames_to_channels(const Tensor& x, std::int64_t t_frames);
void frames_to_channels_adjoint(std::int64_t t_frames, const Tensor& gout, Tensor* gx);

// (B,C,H,W) -> (B,H,W,C); pairs an anchor grid with its flattened map.
Tensor channels_last(const Tensor& x);
void channels_last_adjoint(const Shape& x_shape, const Tensor& gout, Tensor* gx);

// out[b,c,...] = x[b,c,...] * gate[b,c].
Tensor channel_scale(const Tensor& x, const Tensor& gate);
void channel_scale_adjoint(const Tensor& x, const Tensor& gate, const Tensor& gout,
                           Tensor* gx, Tensor* ggate);

// Row selection: x (N,D), indices into [0,N) -> (K,D). Repeats allowed.
Tensor gather_rows(const Tensor& x, const std::vector<std::int64_t>& idx);
void gather_rows_adjoint(const std::vector<std::int64_t>& idx, const Tensor& gout,
                         Tensor* gx);

Tensor sum_all(const Tensor& x);  // -> shape (1)
void sum_all_adjoint(const Shape& x_shape, const Tensor& gout, Tensor* gx);

// Average pooling of box regions into a bins x bins grid. x is (N,C,H,W),
// boxes are (x1,y1,x2,y2) in feature-map coordinates paired with their source
// row n; output row k is the flattened (C,bins,bins) block for box k. Boxes
// are constants; no gradient flows to them.
struct RoiBox {
  std::int64_t n = 0;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};
Tensor roi_avg_pool(const Tensor& x, const std::vector<RoiBox>& boxes, int bins);
void roi_avg_pool_adjoint(const Tensor& x, const std::vector<RoiBox>& boxes, int bins,
                          const Tensor& gout, Tensor* gx);

}  // namespace vsflab::ops

#include "vsflab/autograd.hpp"

#include <utility>

namespace vsflab::ag {

Var add(Tape& tp, Var a, Var b) {
  return tp.record(ops::add(tp.val(a), tp.val(b)), {a, b},
                   [a, b](Tape& t, const Tensor& g) {
                     ops::add_adjoint(g, t.grad_sink(a), t.grad_sink(b));
                   });
}

Var sub(Tape& tp, Var a, Var b) {
  return tp.record(ops::sub(tp.val(a), tp.val(b)), {a, b},
                   [a, b](Tape& t, const Tensor& g) {
                     ops::sub_adjoint(g, t.grad_sink(a), t.grad_sink(b));
                   });
}

Var mul(Tape& tp, Var a, Var b) {
  return tp.record(ops::mul(tp.val(a), tp.val(b)), {a, b},
                   [a, b](Tape& t, const Tensor& g) {
                     ops::mul_adjoint(t.val(a), t.val(b), g, t.grad_sink(a),
                                      t.grad_sink(b));
                   });
}

Var scale(Tape& tp, Var a, double k) {
  return tp.record(ops::scale(tp.val(a), k), {a}, [a, k](Tape& t, const Tensor& g) {
    ops::scale_adjoint(k, g, t.grad_sink(a));
  });
}

Var relu(Tape& tp, Var a) {
  return tp.record(ops::relu(tp.val(a)), {a}, [a](Tape& t, const Tensor& g) {
    ops::relu_adjoint(t.val(a), g, t.grad_sink(a));
  });
}

Var sigmoid(Tape& tp, Var a) {
  Tensor out = ops::sigmoid(tp.val(a));
  // The adjoint reads the op's own output; keep a copy in the closure.
  Tensor saved = out;
  return tp.record(std::move(out), {a},
                   [a, saved = std::move(saved)](Tape& t, const Tensor& g) {
                     ops::sigmoid_adjoint(saved, g, t.grad_sink(a));
                   });
}

Var smooth_l1(Tape& tp, Var a) {
  return tp.record(ops::smooth_l1(tp.val(a)), {a}, [a](Tape& t, const Tensor& g) {
    ops::smooth_l1_adjoint(t.val(a), g, t.grad_sink(a));
  });
}

Var binary_cross_entropy(Tape& tp, Var prob, Var target) {
  return tp.record(ops::binary_cross_entropy(tp.val(prob), tp.val(target)),
                   {prob, target}, [prob, target](Tape& t, const Tensor& g) {
                     ops::binary_cross_entropy_adjoint(t.val(prob), t.val(target), g,
                                                       t.grad_sink(prob));
                   });
}

Var conv2d(Tape& tp, Var x, Var w, Var b, int stride) {
  return tp.record(ops::conv2d(tp.val(x), tp.val(w), tp.val(b), stride), {x, w, b},
                   [x, w, b, stride](Tape& t, const Tensor& g) {
                     ops::conv2d_adjoint(t.val(x), t.val(w), stride, g,
                                         t.grad_sink(x), t.grad_sink(w),
                                         t.grad_sink(b));
                   });
}

Var conv3d(Tape& tp, Var x, Var w, Var b) {
  return tp.record(ops::conv3d(tp.val(x), tp.val(w), tp.val(b)), {x, w, b},
                   [x, w, b](Tape& t, const Tensor& g) {
                     ops::conv3d_adjoint(t.val(x), t.val(w), g, t.grad_sink(x),
                                         t.grad_sink(w), t.grad_sink(b));
                   });
}

Var global_avg_pool(Tape& tp, Var x) {
  Shape xs = tp.val(x).shape();
  return tp.record(ops::global_avg_pool(tp.val(x)), {x},
                   [x, xs](Tape& t, const Tensor& g) {
                     ops::global_avg_pool_adjoint(xs, g, t.grad_sink(x));
                   });
}

Var fully_connected(Tape& tp, Var x, Var w, Var b) {
  return tp.record(ops::fully_connected(tp.val(x), tp.val(w), tp.val(b)), {x, w, b},
                   [x, w, b](Tape& t, const Tensor& g) {
                     ops::fully_connected_adjoint(t.val(x), t.val(w), g,
                                                  t.grad_sink(x), t.grad_sink(w),
                                                  t.grad_sink(b));
                   });
}

Var split_frames(Tape& tp, Var x, std::int64_t t_frames) {
  return tp.record(ops::split_frames(tp.val(x), t_frames), {x},
                   [x, t_frames](Tape& t, const Tensor& g) {
                     ops::split_frames_adjoint(t_frames, g, t.grad_sink(x));
                   });
}

Var merge_frames(Tape& tp, Var x) {
  Shape xs = tp.val(x).shape();
  return tp.record(ops::merge_frames(tp.val(x)), {x},
                   [x, xs](Tape& t, const Tensor& g) {
                     ops::merge_frames_adjoint(xs, g, t.grad_sink(x));
                   });
}

Var frames_to_channels(Tape& tp, Var x, std::int64_t t_frames) {
  return tp.record(ops::frames_to_channels(tp.val(x), t_frames), {x},
                   [x, t_frames](Tape& t, const Tensor& g) {
                     ops::frames_to_channels_adjoint(t_frames, g, t.grad_sink(x));
                   });
}

Var channels_last(Tape& tp, Var x) {
  Shape xs = tp.val(x).shape();
  return tp.record(ops::channels_last(tp.val(x)), {x},
                   [x, xs](Tape& t, const Tensor& g) {
                     ops::channels_last_adjoint(xs, g, t.grad_sink(x));
                   });
}

Var channel_scale(Tape& tp, Var x, Var gate) {
  return tp.record(ops::channel_scale(tp.val(x), tp.val(gate)), {x, gate},
                   [x, gate](Tape& t, const Tensor& g) {
                     ops::channel_scale_adjoint(t.val(x), t.val(gate), g,
                                                t.grad_sink(x), t.grad_sink(gate));
                   });
}

Var gather_rows(Tape& tp, Var x, std::vector<std::int64_t> idx) {
  Tensor out = ops::gather_rows(tp.val(x), idx);
  return tp.record(std::move(out), {x},
                   [x, idx = std::move(idx)](Tape& t, const Tensor& g) {
                     ops::gather_rows_adjoint(idx, g, t.grad_sink(x));
                   });
}

Var sum_all(Tape& tp, Var x) {
  Shape xs = tp.val(x).shape();
  return tp.record(ops::sum_all(tp.val(x)), {x}, [x, xs](Tape& t, const Tensor& g) {
    ops::sum_all_adjoint(xs, g, t.grad_sink(x));
  });
}

Var mean_all(Tape& tp, Var x) {
  const double inv = 1.0 / static_cast<double>(tp.val(x).size());
  return scale(tp, sum_all(tp, x), inv);
}

Var reshape(Tape& tp, Var x, Shape shape) {
  Shape xs = tp.val(x).shape();
  return tp.record(tp.val(x).reshape_view(std::move(shape)), {x},
                   [x, xs](Tape& t, const Tensor& g) {
                     Tensor* gx = t.grad_sink(x);
                     if (!gx) return;
                     for (std::int64_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                   });
}

Var roi_avg_pool(Tape& tp, Var x, std::vector<ops::RoiBox> boxes, int bins) {
  Tensor out = ops::roi_avg_pool(tp.val(x), boxes, bins);
  return tp.record(std::move(out), {x},
                   [x, boxes = std::move(boxes), bins](Tape& t, const Tensor& g) {
                     ops::roi_avg_pool_adjoint(t.val(x), boxes, bins, g,
                                               t.grad_sink(x));
                   });
}

}  // namespace vsflab::ag

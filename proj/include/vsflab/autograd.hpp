#pragma once

#include <vector>

#include "vsflab/ops.hpp"
#include "vsflab/tape.hpp"

// Tape-recorded counterparts of the kernels in ops.hpp. Each runs the
// forward kernel eagerly and registers the matching adjoint.
namespace vsflab::ag {

Var add(Tape& tp, Var a, Var b);
Var sub(Tape& tp, Var a, Var b);
Var mul(Tape& tp, Var a, Var b);
Var scale(Tape& tp, Var a, double k);
Var relu(Tape& tp, Var a);
Var sigmoid(Tape& tp, Var a);
Var smooth_l1(Tape& tp, Var a);
Var binary_cross_entropy(Tape& tp, Var prob, Var target);
Var conv2d(Tape& tp, Var x, Var w, Var b, int stride);
Var conv3d(Tape& tp, Var x, Var w, Var b);
Var global_avg_pool(Tape& tp, Var x);
Var fully_connected(Tape& tp, Var x, Var w, Var b);
Var split_frames(Tape& tp, Var x, std::int64_t t_frames);
Var merge_frames(Tape& tp, Var x);
Var frames_to_channels(Tape& tp, Var x, std::int64_t t_frames);
Var channels_last(Tape& tp, Var x);
Var channel_scale(Tape& tp, Var x, Var gate);
Var gather_rows(Tape& tp, Var x, std::vector<std::int64_t> idx);
Var sum_all(Tape& tp, Var x);
Var mean_all(Tape& tp, Var x);
Var reshape(Tape& tp, Var x, Shape shape);
Var roi_avg_pool(Tape& tp, Var x, std::vector<ops::RoiBox> boxes, int bins);

}  // namespace vsflab::ag

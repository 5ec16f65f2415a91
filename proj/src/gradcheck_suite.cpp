#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vsflab/detector.hpp"
#include "vsflab/gradcheck.hpp"
#include "vsflab/vsf.hpp"

namespace vsflab {

namespace {

// Builds the graph from leaf vars (one per input tensor, in order) and
// returns its output node, of any shape.
using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Checks d(sum(out * proj))/d(inputs) for a fixed random projection, which
// probes the full Jacobian in one random direction instead of just its
// column sums.
GradCheckResult projected_check(const std::string& name,
                                std::vector<Tensor> inputs,
                                const Builder& build, Rng& rng,
                                double tol = kGradCheckTolOps) {
  Tensor proj;
  {
    Tape tp;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tp.leaf(t, true));
    proj = Tensor{tp.val(build(tp, vars)).shape()};
    fill_uniform(proj, rng);
  }
  const auto scalar = [&](Tape& tp, std::vector<Var>& vars) {
    for (const Tensor& t : inputs) vars.push_back(tp.leaf(t, true));
    return ag::sum_all(tp, ag::mul(tp, build(tp, vars), tp.leaf(proj, false)));
  };
  std::vector<Tensor> analytic;
  {
    Tape tp;
    std::vector<Var> vars;
    tp.backward(scalar(tp, vars));
    for (Var v : vars)
      analytic.push_back(tp.has_grad(v) ? tp.grad(v)
                                        : Tensor{tp.val(v).shape()});
  }
  std::vector<Tensor*> ptrs;
  for (Tensor& t : inputs) ptrs.push_back(&t);
  const auto eval = [&]() {
    Tape tp;
    std::vector<Var> vars;
    return tp.val(scalar(tp, vars))[0];
  };
  return finite_diff_compare(name, ptrs, eval, analytic, kGradCheckStep, tol);
}

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t{std::move(shape)};
  fill_uniform(t, rng, lo, hi);
  return t;
}

void tensorcore_checks(std::vector<GradCheckResult>& out, Rng& rng) {
  const auto one = [](Var (*op)(Tape&, Var)) {
    return [op](Tape& tp, const std::vector<Var>& v) { return op(tp, v[0]); };
  };
  const auto two = [](Var (*op)(Tape&, Var, Var)) {
    return
        [op](Tape& tp, const std::vector<Var>& v) { return op(tp, v[0], v[1]); };
  };

  out.push_back(projected_check("tensorcore/add",
                                {rand_tensor({2, 3}, rng), rand_tensor({2, 3}, rng)},
                                two(&ag::add), rng));
  out.push_back(projected_check("tensorcore/sub",
                                {rand_tensor({2, 3}, rng), rand_tensor({2, 3}, rng)},
                                two(&ag::sub), rng));
  out.push_back(projected_check("tensorcore/mul",
                                {rand_tensor({2, 3}, rng), rand_tensor({2, 3}, rng)},
                                two(&ag::mul), rng));
  out.push_back(projected_check(
      "tensorcore/scale", {rand_tensor({2, 3}, rng)},
      [](Tape& tp, const std::vector<Var>& v) { return ag::scale(tp, v[0], -1.7); },
      rng));
  out.push_back(projected_check("tensorcore/relu", {rand_tensor({2, 3}, rng)},
                                one(&ag::relu), rng));
  out.push_back(projected_check("tensorcore/sigmoid", {rand_tensor({2, 3}, rng)},
                                one(&ag::sigmoid), rng));
  out.push_back(projected_check("tensorcore/smooth_l1",
                                {rand_tensor({2, 3}, rng, -2.0, 2.0)},
                                one(&ag::smooth_l1), rng));

  {
    Tensor target{{2, 3}};
    for (std::int64_t i = 0; i < target.size(); ++i)
      target[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    out.push_back(projected_check(
        "tensorcore/binary_cross_entropy", {rand_tensor({2, 3}, rng, -2.0, 2.0)},
        [target](Tape& tp, const std::vector<Var>& v) {
          return ag::binary_cross_entropy(tp, ag::sigmoid(tp, v[0]),
                                          tp.leaf(target, false));
        },
        rng));
  }

  for (const int stride : {1, 2})
    out.push_back(projected_check(
        "tensorcore/conv2d_s" + std::to_string(stride),
        {rand_tensor({1, 2, 4, 4}, rng), rand_tensor({2, 2, 3, 3}, rng),
         rand_tensor({2}, rng)},
        [stride](Tape& tp, const std::vector<Var>& v) {
          return ag::conv2d(tp, v[0], v[1], v[2], stride);
        },
        rng));
  out.push_back(projected_check(
      "tensorcore/conv2d_1x1",
      {rand_tensor({1, 2, 4, 4}, rng), rand_tensor({2, 2, 1, 1}, rng),
       rand_tensor({2}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::conv2d(tp, v[0], v[1], v[2], 1);
      },
      rng));
  out.push_back(projected_check(
      "tensorcore/conv3d",
      {rand_tensor({1, 2, 4, 4, 3}, rng), rand_tensor({2, 2, 3, 3, 3}, rng),
       rand_tensor({2}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::conv3d(tp, v[0], v[1], v[2]);
      },
      rng));
  out.push_back(projected_check("tensorcore/global_avg_pool",
                                {rand_tensor({1, 2, 4, 4, 3}, rng)},
                                one(&ag::global_avg_pool), rng));
  out.push_back(projected_check(
      "tensorcore/fully_connected",
      {rand_tensor({2, 3}, rng), rand_tensor({4, 3}, rng), rand_tensor({4}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::fully_connected(tp, v[0], v[1], v[2]);
      },
      rng));
  out.push_back(projected_check(
      "tensorcore/split_frames", {rand_tensor({3, 2, 4, 4}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::split_frames(tp, v[0], 3);
      },
      rng));
  out.push_back(projected_check("tensorcore/merge_frames",
                                {rand_tensor({1, 2, 4, 4, 3}, rng)},
                                one(&ag::merge_frames), rng));
  out.push_back(projected_check(
      "tensorcore/frames_to_channels", {rand_tensor({3, 2, 4, 4}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::frames_to_channels(tp, v[0], 3);
      },
      rng));
  out.push_back(projected_check("tensorcore/channels_last",
                                {rand_tensor({1, 2, 4, 4}, rng)},
                                one(&ag::channels_last), rng));
  out.push_back(projected_check(
      "tensorcore/channel_scale",
      {rand_tensor({1, 2, 4, 4, 3}, rng), rand_tensor({1, 2}, rng)},
      two(&ag::channel_scale), rng));
  out.push_back(projected_check(
      "tensorcore/gather_rows", {rand_tensor({4, 3}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::gather_rows(tp, v[0], {0, 2, 2, 3, 1});
      },
      rng));
  out.push_back(projected_check("tensorcore/sum_all", {rand_tensor({2, 3}, rng)},
                                one(&ag::sum_all), rng));
  out.push_back(projected_check("tensorcore/mean_all", {rand_tensor({2, 3}, rng)},
                                one(&ag::mean_all), rng));
  out.push_back(projected_check(
      "tensorcore/reshape", {rand_tensor({2, 6}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::reshape(tp, v[0], {3, 4});
      },
      rng));
  {
    const std::vector<ops::RoiBox> boxes{{0, 0.3, 0.2, 3.6, 3.4},
                                         {0, 1.0, 1.0, 2.0, 3.0}};
    out.push_back(projected_check(
        "tensorcore/roi_avg_pool", {rand_tensor({1, 2, 4, 4}, rng)},
        [boxes](Tape& tp, const std::vector<Var>& v) {
          return ag::roi_avg_pool(tp, v[0], boxes, 2);
        },
        rng));
  }
}

// Direct kernel check for the single-volume shift, exercising both the
// value and the offset-field adjoints without the tape in the loop.
GradCheckResult raw_shift_check(Rng& rng) {
  Tensor vol = rand_tensor({4, 4, 3}, rng);
  // Fractional offsets: exact integers sit on interpolation kinks where a
  // one-sided analytic derivative and a central difference disagree.
  OffsetField field{rand_tensor({4, 4, 3, 3}, rng, -0.8, 0.8)};
  Tensor proj{{4, 4, 3}};
  fill_uniform(proj, rng);

  const auto eval = [&]() {
    const Tensor out = vsf_shift(vol, field);
    double s = 0;
    for (std::int64_t i = 0; i < out.size(); ++i) s += out[i] * proj[i];
    return s;
  };
  Tensor gvol{vol.shape()}, gfield{field.values.shape()};
  vsf_shift_adjoint(vol, field, proj, &gvol, &gfield);
  return finite_diff_compare("vsf/vsf_shift", {&vol, &field.values}, eval,
                             {gvol, gfield});
}

void vsf_checks(std::vector<GradCheckResult>& out, Rng& rng) {
  out.push_back(raw_shift_check(rng));
  out.push_back(projected_check(
      "vsf/vsf_shift_all_conv",
      {rand_tensor({1, 2, 4, 4, 3}, rng), rand_tensor({1, 3, 4, 4, 3}, rng, -0.8, 0.8)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::vsf_shift_all(tp, v[0], v[1], ShiftSchedule::none);
      },
      rng));
  out.push_back(projected_check(
      "vsf/vsf_shift_all_data", {rand_tensor({1, 3, 4, 4, 3}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::vsf_shift_all(tp, v[0], Var{}, ShiftSchedule::data);
      },
      rng));
  out.push_back(projected_check(
      "vsf/vsf_shift_all_feature",
      {rand_tensor({1, 8, 4, 4, 3}, rng), rand_tensor({1, 3, 4, 4, 3}, rng, -0.8, 0.8)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::vsf_shift_all(tp, v[0], v[1], ShiftSchedule::feature);
      },
      rng));
  out.push_back(projected_check(
      "vsf/differential_attention_fuse",
      {rand_tensor({1, 2, 4, 4, 3}, rng), rand_tensor({1, 2, 4, 4, 3}, rng),
       rand_tensor({2, 2}, rng), rand_tensor({2}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::differential_attention_fuse(tp, v[0], v[1], v[2], v[3]);
      },
      rng));
  out.push_back(projected_check(
      "vsf/vsf_block",
      {rand_tensor({3, 2, 4, 4}, rng), rand_tensor({3, 2, 3, 3, 3}, rng, -0.3, 0.3),
       rand_tensor({3}, rng, -0.3, 0.3), rand_tensor({2, 2}, rng),
       rand_tensor({2}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::vsf_block(tp, v[0], 3, ShiftSchedule::none,
                             ag::VsfBlockParams{v[1], v[2], v[3], v[4]});
      },
      rng));
  out.push_back(projected_check(
      "vsf/vsf_block_schedule_only", {rand_tensor({3, 3, 4, 4}, rng)},
      [](Tape& tp, const std::vector<Var>& v) {
        return ag::vsf_block(tp, v[0], 3, ShiftSchedule::data,
                             ag::VsfBlockParams{});
      },
      rng));
}

ClipSample micro_clip(const ModelConfig& cfg, Rng& rng) {
  ClipSample clip;
  for (int f = 0; f < cfg.t_frames; ++f) {
    GrayImage img(cfg.image_w, cfg.image_h);
    for (std::uint8_t& p : img.px)
      p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    clip.frames.push_back(img);
    clip.boxes.emplace_back(BoxI{1 + f, 2, 5 + f, 6});
  }
  return clip;
}

GradCheckResult detector_check(Variant variant, Rng& rng) {
  const ModelConfig cfg = ModelConfig::micro(variant);
  Rng init = Rng::substream(7, "gradcheck/init");
  ParamSet params = build_model(cfg, init);
  // The offset convolutions and fusion gates initialize to zero, which
  // parks every shifted sample on an integer-coordinate interpolation kink;
  // randomize everything so finite differences probe smooth surroundings.
  for (auto& [name, t] : params.items) fill_uniform(t, rng, -0.3, 0.3);
  const ClipSample clip = micro_clip(cfg, rng);

  StructuralChoices choices;
  {
    Tape tp;
    Rng sample = Rng::substream(7, "gradcheck/sample");
    const auto lifted = lift_params(tp, params, true);
    clip_loss(tp, cfg, lifted, clip, sample, nullptr, &choices, nullptr);
  }
  const auto eval = [&]() {
    Tape tp;
    Rng sample(0);  // untouched on replay
    const auto lifted = lift_params(tp, params, true);
    return tp.val(
        clip_loss(tp, cfg, lifted, clip, sample, &choices, nullptr, nullptr))[0];
  };
  std::vector<Tensor> analytic;
  std::vector<Tensor*> ptrs;
  {
    Tape tp;
    Rng sample(0);
    const auto lifted = lift_params(tp, params, true);
    tp.backward(clip_loss(tp, cfg, lifted, clip, sample, &choices, nullptr, nullptr));
    for (auto& [name, t] : params.items) {
      const Var v = lifted.at(name);
      analytic.push_back(tp.has_grad(v) ? tp.grad(v) : Tensor{t.shape()});
      ptrs.push_back(&t);
    }
  }
  return finite_diff_compare("detector/" + variant_name(variant) + "_micro_loss",
                             ptrs, eval, analytic, kGradCheckStep,
                             kGradCheckTolEndToEnd);
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(const std::string& scope,
                                                 std::uint64_t seed) {
  require(scope == "all" || scope == "tensorcore" || scope == "vsf" ||
              scope == "detector",
          "unknown gradcheck scope: " + scope);
  Rng rng = Rng::substream(seed, "gradcheck/" + scope);
  std::vector<GradCheckResult> out;
  if (scope == "all" || scope == "tensorcore") tensorcore_checks(out, rng);
  if (scope == "all" || scope == "vsf") vsf_checks(out, rng);
  if (scope == "all" || scope == "detector") {
    out.push_back(detector_check(Variant::concat_baseline, rng));
    out.push_back(detector_check(Variant::vsf_data, rng));
    out.push_back(detector_check(Variant::vsf_full, rng));
    out.push_back(detector_check(Variant::frame_baseline, rng));
  }
  return out;
}

}  // namespace vsflab

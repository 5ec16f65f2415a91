#include <doctest.h>

#include <cmath>

#include "vsflab/gradcheck.hpp"
#include "vsflab/vsf.hpp"

using namespace vsflab;

namespace {

Tensor random_volume(Shape shape, std::uint64_t seed) {
  Tensor t{std::move(shape)};
  Rng rng(seed);
  fill_uniform(t, rng);
  return t;
}

}  // namespace

TEST_CASE("temporal bias schedule for input channels") {
  // Channel 0 looks back one frame (wrapping at t=0), channel 1 stays,
  // channel 2 looks ahead one frame (wrapping at t=T-1).
  const int T = 8;
  for (int t = 0; t < T; ++t) {
    CHECK(bias_data(0, t, T) == (t == 0 ? T - 1.0 : -1.0));
    CHECK(bias_data(1, t, T) == 0.0);
    CHECK(bias_data(2, t, T) == (t == T - 1 ? 1.0 - T : 1.0));
  }
}

TEST_CASE("temporal bias schedule for feature channels") {
  // Eight equal groups: the first four shift by -2,-1,+1,+2; the top half
  // stays in place.
  const int C = 64;
  for (int c = 0; c < C; ++c) {
    const int group = c / (C / 8);
    double want = 0.0;
    if (group == 0) want = -2.0;
    if (group == 1) want = -1.0;
    if (group == 2) want = 1.0;
    if (group == 3) want = 2.0;
    CHECK(bias_fea(c, C) == want);
  }
  CHECK_THROWS_AS(bias_fea(0, 12), Error);  // needs eight even groups
}

TEST_CASE("zero offsets are a bit-exact identity") {
  const Tensor vol = random_volume({4, 4, 3}, 1);
  OffsetField field{Tensor{{4, 4, 3, 3}}};
  const Tensor out = vsf_shift(vol, field);
  for (std::int64_t i = 0; i < vol.size(); ++i) CHECK(out[i] == vol[i]);
}

TEST_CASE("integer offsets fetch exact neighbors and zero-pad") {
  const std::int64_t H = 3, W = 4, T = 2;
  const Tensor vol = random_volume({H, W, T}, 2);
  OffsetField field{Tensor{{H, W, T, 3}}};
  for (std::int64_t i = 0; i < field.values.size(); i += 3)
    field.values[i] = 1.0;  // dx = +1 everywhere
  const Tensor out = vsf_shift(vol, field);
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x)
      for (std::int64_t t = 0; t < T; ++t) {
        const double want = x + 1 < W ? vol[(y * W + x + 1) * T + t] : 0.0;
        CHECK(out[(y * W + x) * T + t] == want);
      }
}

TEST_CASE("half-cell offsets average the surrounding corners") {
  Tensor vol{{2, 2, 2}};
  for (std::int64_t i = 0; i < 8; ++i) vol[i] = static_cast<double>(1 << i);
  OffsetField field{Tensor{{2, 2, 2, 3}}};
  for (std::int64_t i = 0; i < field.values.size(); ++i) field.values[i] = 0.5;
  const Tensor out = vsf_shift(vol, field);
  // At (0,0,0) all eight corners lie inside: plain mean.
  double mean = 0.0;
  for (std::int64_t i = 0; i < 8; ++i) mean += vol[i];
  mean /= 8.0;
  CHECK(out[0] == doctest::Approx(mean).epsilon(1e-12));
  // At (1,1,1) seven corners fall outside and contribute zero.
  CHECK(out[7] == doctest::Approx(vol[7] / 8.0).epsilon(1e-12));
}

TEST_CASE("shift is linear in the sampled volume") {
  const Tensor f1 = random_volume({4, 4, 3}, 3);
  const Tensor f2 = random_volume({4, 4, 3}, 4);
  Tensor combo{{4, 4, 3}};
  for (std::int64_t i = 0; i < combo.size(); ++i)
    combo[i] = 2.0 * f1[i] - 0.5 * f2[i];
  OffsetField field{random_volume({4, 4, 3, 3}, 5)};
  const Tensor s1 = vsf_shift(f1, field);
  const Tensor s2 = vsf_shift(f2, field);
  const Tensor sc = vsf_shift(combo, field);
  for (std::int64_t i = 0; i < sc.size(); ++i)
    CHECK(sc[i] == doctest::Approx(2.0 * s1[i] - 0.5 * s2[i]).epsilon(1e-12));
}

TEST_CASE("data schedule equals a circular temporal roll") {
  const std::int64_t B = 2, H = 5, W = 4, T = 6;
  const Tensor f = random_volume({B, 3, H, W, T}, 6);
  const Tensor out = vsf_shift_all(f, nullptr, ShiftSchedule::data);

  const auto at = [&](const Tensor& v, std::int64_t b, std::int64_t c,
                      std::int64_t y, std::int64_t x, std::int64_t t) {
    return v[(((b * 3 + c) * H + y) * W + x) * T + t];
  };
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t x = 0; x < W; ++x)
        for (std::int64_t t = 0; t < T; ++t) {
          CHECK(at(out, b, 0, y, x, t) == at(f, b, 0, y, x, (t - 1 + T) % T));
          CHECK(at(out, b, 1, y, x, t) == at(f, b, 1, y, x, t));
          CHECK(at(out, b, 2, y, x, t) == at(f, b, 2, y, x, (t + 1) % T));
        }
}

TEST_CASE("feature schedule zero-pads instead of wrapping") {
  const std::int64_t T = 4;
  const Tensor f = random_volume({1, 8, 2, 2, T}, 7);
  const Tensor out = vsf_shift_all(f, nullptr, ShiftSchedule::feature);
  const auto at = [&](const Tensor& v, std::int64_t c, std::int64_t t) {
    return v[((c * 2 + 0) * 2 + 0) * T + t];
  };
  // Channel 0 shifts by -2: out(t) = f(t-2), missing frames read as zero.
  CHECK(at(out, 0, 0) == 0.0);
  CHECK(at(out, 0, 1) == 0.0);
  CHECK(at(out, 0, 2) == at(f, 0, 0));
  CHECK(at(out, 0, 3) == at(f, 0, 1));
  // Channel 2 shifts by +1.
  CHECK(at(out, 2, 0) == at(f, 2, 1));
  CHECK(at(out, 2, 3) == 0.0);
  // Top half unchanged.
  for (std::int64_t t = 0; t < T; ++t) CHECK(at(out, 5, t) == at(f, 5, t));
}

TEST_CASE("schedule preconditions") {
  const Tensor bad = random_volume({1, 4, 2, 2, 2}, 8);
  CHECK_THROWS_AS(vsf_shift_all(bad, nullptr, ShiftSchedule::data), Error);
  CHECK_THROWS_AS(vsf_shift_all(bad, nullptr, ShiftSchedule::feature), Error);
}

TEST_CASE("untrained fusion gate adds half the original") {
  const Tensor f = random_volume({1, 2, 3, 3, 2}, 9);
  Tape tp;
  Var shifted = tp.leaf(f, false);
  Var orig = tp.leaf(f, false);
  Var fc_w = tp.leaf(Tensor{{2, 2}}, false);
  Var fc_b = tp.leaf(Tensor{{2}}, false);
  Var fused = ag::differential_attention_fuse(tp, shifted, orig, fc_w, fc_b);
  const Tensor& out = tp.val(fused);
  for (std::int64_t i = 0; i < f.size(); ++i)
    CHECK(out[i] == doctest::Approx(1.5 * f[i]).epsilon(1e-12));
}

TEST_CASE("gate responds to the shifted-minus-original difference") {
  const Tensor a = random_volume({1, 2, 3, 3, 2}, 10);
  Tensor b{a.shape()};
  for (std::int64_t i = 0; i < b.size(); ++i) b[i] = a[i] + 1.0;
  Tape tp;
  Tensor w{{2, 2}};
  w[0] = w[3] = 5.0;  // strong positive gate from the pooled difference
  Var fused = ag::differential_attention_fuse(
      tp, tp.leaf(b, false), tp.leaf(a, false), tp.leaf(w, false),
      tp.leaf(Tensor{{2}}, false));
  const Tensor& out = tp.val(fused);
  // sigmoid(5 * mean(b - a)) = sigmoid(5) ~ 0.9933
  const double gate = 1.0 / (1.0 + std::exp(-5.0));
  for (std::int64_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == doctest::Approx(b[i] + gate * a[i]).epsilon(1e-9));
}

TEST_CASE("offset prediction is a three-channel volume conv") {
  const Tensor f = random_volume({2, 4, 3, 3, 2}, 11);
  Tensor w{{3, 4, 3, 3, 3}};
  Tensor bias = Tensor::from_data({3}, {0.25, -1.0, 2.0});
  const Tensor off = predict_offsets(f, w, bias);
  CHECK(off.shape() == Shape{2, 3, 3, 3, 2});
  // Zero weights: the prediction is the bias broadcast per channel.
  const std::int64_t plane = 3 * 3 * 2;
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t i = 0; i < plane; ++i)
        CHECK(off[(b * 3 + c) * plane + i] == bias[c]);

  Tensor w2{{2, 4, 3, 3, 3}};
  CHECK_THROWS_AS(predict_offsets(f, w2, Tensor{{2}}), Error);
}

TEST_CASE("vsf block preserves the frame-major layout") {
  const std::int64_t T = 3;
  const Tensor x = random_volume({T * 2, 4, 4, 4}, 12);
  Tape tp;
  Var xin = tp.leaf(x, false);
  // Schedule-free block with zero offsets and no fusion: exact identity.
  ag::VsfBlockParams params;
  params.conv_w = tp.leaf(Tensor{{3, 4, 3, 3, 3}}, false);
  params.conv_b = tp.leaf(Tensor{{3}}, false);
  Var out = ag::vsf_block(tp, xin, T, ShiftSchedule::none, params);
  CHECK(tp.val(out).shape() == x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(tp.val(out)[i] == x[i]);
}

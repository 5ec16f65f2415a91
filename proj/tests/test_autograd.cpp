#include <doctest.h>

#include <cmath>

#include "vsflab/autograd.hpp"

using namespace vsflab;

namespace {

Tensor t1(std::initializer_list<double> v) {
  return Tensor::from_data({static_cast<std::int64_t>(v.size())}, v);
}

}  // namespace

TEST_CASE("smooth penalty values and slopes") {
  Tensor x = t1({0.5, 2.0, -0.25, -3.0});
  Tensor y = ops::smooth_l1(x);
  CHECK(y[0] == doctest::Approx(0.125));   // 0.5 * 0.5^2
  CHECK(y[1] == doctest::Approx(1.5));     // 2 - 0.5
  CHECK(y[2] == doctest::Approx(0.03125));
  CHECK(y[3] == doctest::Approx(2.5));

  Tape tp;
  Var v = tp.leaf(x, true);
  tp.backward(ag::sum_all(tp, ag::smooth_l1(tp, v)));
  const Tensor& g = tp.grad(v);
  CHECK(g[0] == doctest::Approx(0.5));   // x inside the quadratic zone
  CHECK(g[1] == doctest::Approx(1.0));   // sign(x) outside
  CHECK(g[3] == doctest::Approx(-1.0));
}

TEST_CASE("cross entropy value and clamping") {
  Tensor prob = t1({0.8, 0.5});
  Tensor target = t1({1.0, 0.0});
  Tensor l = ops::binary_cross_entropy(prob, target);
  CHECK(l[0] == doctest::Approx(0.2231435513142097).epsilon(1e-12));
  CHECK(l[1] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // A confident correct prediction costs no more than the clamp floor.
  Tensor sure = ops::binary_cross_entropy(t1({1.0}), t1({1.0}));
  CHECK(sure[0] < 1e-6);
  CHECK(sure[0] > 0.0);
}

TEST_CASE("fully connected oracle") {
  Tensor x = Tensor::from_data({1, 2}, {1.0, 2.0});
  Tensor w = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor b = t1({0.5, -1.0});
  Tensor y = ops::fully_connected(x, w, b);
  CHECK(y.shape() == Shape{1, 2});
  CHECK(y[0] == doctest::Approx(5.5));
  CHECK(y[1] == doctest::Approx(10.0));
}

TEST_CASE("conv2d geometry and linearity") {
  Tensor x{{1, 1, 4, 4}};
  for (std::int64_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
  Tensor w{{1, 1, 3, 3}};
  w[4] = 1.0;  // center tap: identity kernel
  Tensor b{{1}};

  Tensor same = ops::conv2d(x, w, b, 1);
  CHECK(same.shape() == Shape{1, 1, 4, 4});
  for (std::int64_t i = 0; i < 16; ++i) CHECK(same[i] == x[i]);

  Tensor half = ops::conv2d(x, w, b, 2);
  CHECK(half.shape() == Shape{1, 1, 2, 2});
  CHECK(half[0] == x[0]);
  CHECK(half[1] == x[2]);
  CHECK(half[2] == x[8]);

  // Convolution is linear in its input when the bias is zero.
  Tensor wf{{1, 1, 3, 3}};
  for (std::int64_t i = 0; i < 9; ++i) wf[i] = 0.1 * static_cast<double>(i + 1);
  Tensor y1 = ops::conv2d(x, wf, b, 1);
  Tensor x2 = ops::scale(x, 3.0);
  Tensor y2 = ops::conv2d(x2, wf, b, 1);
  for (std::int64_t i = 0; i < y1.size(); ++i)
    CHECK(y2[i] == doctest::Approx(3.0 * y1[i]).epsilon(1e-12));
}

TEST_CASE("frame regrouping layouts") {
  // Two frames of a (1-clip, 2-channel, 1x2) map, values encode position.
  const std::int64_t T = 2;
  Tensor x{{2, 2, 1, 2}};
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);

  Tensor vol = ops::split_frames(x, T);
  CHECK(vol.shape() == Shape{1, 2, 1, 2, 2});
  // vol(b,c,y,x,t) == x(b*T+t, c, y, x); flat input index = ((b*T+t)*2+c)*2+x
  for (std::int64_t c = 0; c < 2; ++c)
    for (std::int64_t j = 0; j < 2; ++j)
      for (std::int64_t t = 0; t < T; ++t) {
        const double want = static_cast<double>((t * 2 + c) * 2 + j);
        CHECK(vol[((c * 1 + 0) * 2 + j) * 2 + t] == want);
      }

  Tensor back = ops::merge_frames(vol);
  CHECK(back.shape() == x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(back[i] == x[i]);

  Tensor wide = ops::frames_to_channels(x, T);
  CHECK(wide.shape() == Shape{1, 4, 1, 2});
  // Frame t's channels occupy block [t*C, (t+1)*C).
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(wide[i] == x[i]);
}

TEST_CASE("gather accumulates gradients for repeated rows") {
  Tensor x = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  Tape tp;
  Var v = tp.leaf(x, true);
  Var sel = ag::gather_rows(tp, v, {0, 0, 2});
  CHECK(tp.val(sel).shape() == Shape{3, 2});
  CHECK(tp.val(sel)[0] == 1.0);
  CHECK(tp.val(sel)[5] == 6.0);
  tp.backward(ag::sum_all(tp, sel));
  const Tensor& g = tp.grad(v);
  CHECK(g[0] == 2.0);  // row 0 selected twice
  CHECK(g[2] == 0.0);  // row 1 never selected
  CHECK(g[4] == 1.0);
}

TEST_CASE("roi pooling averages the covered cells") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor whole = ops::roi_avg_pool(x, {{0, 0, 0, 2, 2}}, 1);
  CHECK(whole.shape() == Shape{1, 1});
  CHECK(whole[0] == doctest::Approx(2.5));

  Tensor grid = ops::roi_avg_pool(x, {{0, 0, 0, 2, 2}}, 2);
  CHECK(grid.shape() == Shape{1, 4});
  CHECK(grid[0] == doctest::Approx(1.0));
  CHECK(grid[3] == doctest::Approx(4.0));
}

TEST_CASE("tape reuses shared subexpressions and guards misuse") {
  Tape tp;
  Var x = tp.leaf(t1({3.0}), true);
  Var y = ag::add(tp, x, x);
  tp.backward(ag::sum_all(tp, y));
  CHECK(tp.grad(x)[0] == 2.0);

  Tape tp2;
  Var a = tp2.leaf(t1({1.0, 2.0}), true);
  CHECK_THROWS_AS(tp2.backward(a), Error);  // non-scalar loss

  Tape tp3;
  Var c = tp3.leaf(t1({1.0}), false);
  CHECK_THROWS_AS(tp3.backward(ag::sum_all(tp3, c)), Error);  // no grad path
}

TEST_CASE("channel gate scales whole channels") {
  Tensor x{{1, 2, 1, 1, 2}, 1.0};
  Tensor gate = Tensor::from_data({1, 2}, {2.0, -3.0});
  Tensor y = ops::channel_scale(x, gate);
  CHECK(y[0] == 2.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == -3.0);
  CHECK(y[3] == -3.0);
}

TEST_CASE("reductions") {
  Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(ops::sum_all(x)[0] == 21.0);
  CHECK_THROWS_AS(ops::global_avg_pool(x), Error);  // needs pooled axes

  Tensor x4 = x.reshape_view({1, 2, 3, 1});
  Tensor p = ops::global_avg_pool(x4);
  CHECK(p.shape() == Shape{1, 2});
  CHECK(p[0] == doctest::Approx(2.0));
  CHECK(p[1] == doctest::Approx(5.0));

  Tape tp;
  Var v = tp.leaf(x, true);
  Var mean = ag::mean_all(tp, v);
  CHECK(tp.val(mean)[0] == doctest::Approx(3.5));
  tp.backward(mean);
  CHECK(tp.grad(v)[0] == doctest::Approx(1.0 / 6));
}

#include <doctest.h>

#include <limits>
#include <sstream>

#include "vsflab/tensor.hpp"

using namespace vsflab;

TEST_CASE("tensor shape validation") {
  CHECK_THROWS_AS(Tensor(Shape{}), Error);                     // rank 0
  CHECK_THROWS_AS(Tensor(Shape({1, 2, 3, 4, 5, 6})), Error);   // rank 6
  CHECK_THROWS_AS(Tensor(Shape({2, 0})), Error);               // zero extent
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), Error);

  Tensor t{{2, 3}, 1.5};
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  CHECK(t[5] == 1.5);
}

TEST_CASE("reshape_view keeps data and checks element count") {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor v = t.reshape_view({3, 2});
  CHECK(v.shape() == Shape({3, 2}));
  for (std::int64_t i = 0; i < 6; ++i) CHECK(v[i] == t[i]);
  CHECK_THROWS_AS(t.reshape_view({4, 2}), Error);
}

TEST_CASE("ensure_finite rejects NaN and infinity") {
  Tensor t{{2}};
  t.ensure_finite("here");
  t[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(t.ensure_finite("here"), Error);
  t[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(t.ensure_finite("here"), Error);
}

TEST_CASE("tensor dump round-trips 32-bit-exact values") {
  // Payload is float32; values representable there survive bit-exactly.
  Tensor t = Tensor::from_data({2, 2, 2}, {0.5, -1.25, 3.0, 0.0, 1e10, -0.0078125, 42.0, 7.5});
  std::stringstream ss;
  write_tensor(ss, t);
  Tensor back = read_tensor(ss);
  CHECK(back.shape() == t.shape());
  for (std::int64_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);
}

TEST_CASE("tensor dump rejects bad input") {
  std::stringstream ss("not a tensor");
  CHECK_THROWS_AS(read_tensor(ss), Error);

  Tensor huge{{1}};
  huge[0] = 1e300;  // not representable in 32 bits
  std::stringstream out;
  CHECK_THROWS_AS(write_tensor(out, huge), Error);
}

TEST_CASE("tensor file round trip") {
  const std::string path = "tensor_roundtrip.vsft";
  Tensor t = Tensor::from_data({3}, {1.0, 2.5, -4.0});
  write_tensor_file(path, t);
  Tensor back = read_tensor_file(path);
  CHECK(back.shape() == t.shape());
  CHECK(back[1] == 2.5);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_tensor_file("does_not_exist.vsft"), Error);
}

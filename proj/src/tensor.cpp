#include "vsflab/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace vsflab {

namespace {

void check_shape(const Shape& s) {
  require(!s.empty() && s.size() <= 5,
          "tensor rank must be 1..5, got " + std::to_string(s.size()));
  for (auto d : s)
    require(d >= 1, "tensor extents must be >= 1, got shape " + shape_str(s));
}

}  // namespace

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  check_shape(shape);
  require(shape_numel(shape) == static_cast<std::int64_t>(data.size()),
          "from_data: " + std::to_string(data.size()) + " values for shape " +
              shape_str(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::reshape_view(Shape new_shape) const {
  check_shape(new_shape);
  require(shape_numel(new_shape) == size(),
          "reshape_view: element count changes, " + shape_str(shape_) + " -> " +
              shape_str(new_shape));
  Tensor t;
  t.shape_ = std::move(new_shape);
  t.data_ = data_;
  return t;
}

void Tensor::ensure_finite(const std::string& where) const {
  for (double v : data_)
    if (!std::isfinite(v))
      fail(where + ": non-finite value in tensor of shape " + shape_str(shape_));
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  require(bool(is), "tensor dump: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559,
              "payload format requires IEEE-754 binary32");

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  require(!t.empty(), "tensor dump: empty tensor");
  os.write("VSFT", 4);
  put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
  for (std::int64_t i = 0; i < t.size(); ++i) {
    const double v = t[i];
    require(std::isfinite(v) && std::abs(v) <= std::numeric_limits<float>::max(),
            "tensor dump: value out of 32-bit range");
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(os, bits);
  }
  require(bool(os), "tensor dump: write failed");
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  require(bool(is) && std::memcmp(magic, "VSFT", 4) == 0,
          "tensor dump: bad magic");
  const std::uint32_t rank = get_u32(is);
  require(rank >= 1 && rank <= 5, "tensor dump: bad rank");
  Shape shape(rank);
  for (auto& d : shape) {
    d = static_cast<std::int64_t>(get_u32(is));
    require(d >= 1, "tensor dump: bad extent");
  }
  Tensor t{shape};
  for (std::int64_t i = 0; i < t.size(); ++i) {
    const std::uint32_t bits = get_u32(is);
    float f;
    std::memcpy(&f, &bits, 4);
    t[i] = static_cast<double>(f);
  }
  return t;
}

void write_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), "cannot open for write: " + path);
  write_tensor(os, t);
  require(bool(os), "write failed: " + path);
}

Tensor read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), "cannot open: " + path);
  return read_tensor(is);
}

}  // namespace vsflab

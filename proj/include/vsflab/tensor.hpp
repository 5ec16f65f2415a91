#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vsflab/common.hpp"

namespace vsflab {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major tensor of 64-bit reals. Rank 1..5, every extent >= 1.
// All kernels accumulate serially in flat row-major order, so every result
// is a deterministic function of its inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  static Tensor from_data(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t dim(std::size_t i) const { return shape_[i]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Metadata-only reinterpretation; element count must be preserved.
  Tensor reshape_view(Shape new_shape) const;

  // Throws if any element is NaN or infinite. `where` names the producing op.
  void ensure_finite(const std::string& where) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Binary tensor dump: magic "VSFT", then rank and extents as unsigned 32-bit
// little-endian, then the payload as 32-bit little-endian reals in row-major
// order. Values outside 32-bit range are an error on write.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void write_tensor_file(const std::string& path, const Tensor& t);
Tensor read_tensor_file(const std::string& path);

}  // namespace vsflab

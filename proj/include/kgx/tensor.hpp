#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kgx/error.hpp"

namespace kgx {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Dense row-major tensor of 64-bit floats. All learnable state and all
// intermediate values in the engine use this one type; complex values are
// interleaved (re, im) pairs on the last axis.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor full(Shape shape, double v);

  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool is_scalar() const { return shape_.empty(); }

  // 2-d helpers; 1-d tensors behave as a single row.
  std::size_t rows() const;
  std::size_t cols() const;
  double* row(std::size_t i) { return data_.data() + i * cols(); }
  const double* row(std::size_t i) const { return data_.data() + i * cols(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double item() const;
  bool all_finite() const;
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const Shape& s);

}  // namespace kgx

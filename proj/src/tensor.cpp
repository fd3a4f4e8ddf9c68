#include "kgx/tensor.hpp"

#include <cmath>

namespace kgx {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = v;
  return t;
}

std::size_t Tensor::rows() const {
  if (ndim() == 2) return shape_[0];
  if (ndim() == 1) return 1;
  throw ShapeError("rows() needs a 1-d or 2-d tensor, got " + shape_str(shape_));
}

std::size_t Tensor::cols() const {
  if (ndim() == 2) return shape_[1];
  if (ndim() == 1) return shape_[0];
  throw ShapeError("cols() needs a 1-d or 2-d tensor, got " + shape_str(shape_));
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + shape_str(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace kgx

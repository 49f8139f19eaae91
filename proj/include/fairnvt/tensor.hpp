#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fairnvt/errors.hpp"

namespace fairnvt {

// Dense float-64 tensor of rank 0, 1 or 2. Rank-2 data is row-major.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {
    check_rank();
  }

  // Tensor with explicit contents. Entries must be finite.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_rank();
    if (data_.size() != count(shape_)) {
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape product " + std::to_string(count(shape_)));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw ValueError("tensor constructed with non-finite entry");
    }
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  // Rank-2 accessors; a rank-1 tensor behaves as a single row.
  std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const {
    if (rank() == 2) return shape_[1];
    if (rank() == 1) return shape_[0];
    return 1;
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  // Scalar value of a rank-0 (or single-element) tensor.
  double item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor with more than one element");
    return data_[0];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }

  void check_rank() const {
    if (shape_.size() > 2) throw ShapeError("tensor rank > 2 is not supported");
    for (std::size_t d : shape_) {
      if (d == 0) throw ShapeError("tensor dimension of size 0");
    }
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace fairnvt

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "otssl/errors.hpp"

namespace otssl {

// Dense row-major tensor of doubles. Deliberately minimal: shape plus flat
// storage, with checked construction and unchecked hot-path accessors.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), values_(count(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (count(shape_) != values_.size())
      throw shape_error("Tensor: shape does not match value count");
  }

  static Tensor matrix(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // 2-D and 3-D accessors; rank is the caller's contract.
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }
  double& at(std::size_t ch, std::size_t r, std::size_t c) {
    return values_[(ch * shape_[1] + r) * shape_[2] + c];
  }
  double at(std::size_t ch, std::size_t r, std::size_t c) const {
    return values_[(ch * shape_[1] + r) * shape_[2] + c];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { values_.assign(values_.size(), v); }

  Tensor& operator+=(const Tensor& other) {
    if (!same_shape(other)) throw shape_error("Tensor::operator+=: shape mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }

  friend Tensor operator+(Tensor lhs, const Tensor& rhs) {
    lhs += rhs;
    return lhs;
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

}  // namespace otssl

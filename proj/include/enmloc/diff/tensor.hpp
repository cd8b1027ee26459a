#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "enmloc/random.hpp"

namespace enmloc::diff {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Reshapes, reusing capacity. Contents are unspecified afterwards.
  void resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.resize(rows * cols);
  }
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Learnable tensor with its accumulated gradient. Vectors are (n x 1).
struct ParamTensor {
  ParamTensor() = default;
  ParamTensor(std::size_t rows, std::size_t cols) : value(rows, cols), grad(rows, cols) {}

  std::size_t rows() const { return value.rows(); }
  std::size_t cols() const { return value.cols(); }
  std::size_t size() const { return value.size(); }

  void zero_grad() { grad.fill(0.0); }

  Matrix value;
  Matrix grad;
};

struct InitScheme {
  enum class Kind { kUniformFanIn, kConstant };

  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static InitScheme uniform_fan_in(std::size_t fan_in) {
    return {Kind::kUniformFanIn, static_cast<double>(fan_in)};
  }
  static InitScheme constant(double value) { return {Kind::kConstant, value}; }

  Kind kind;
  double arg;  // fan_in or the constant
};

ParamTensor param_init(std::size_t rows, std::size_t cols, Rng& rng, InitScheme scheme);

}  // namespace enmloc::diff

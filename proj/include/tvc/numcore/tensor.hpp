#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvc::num {

class NumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public NumError {
 public:
  using NumError::NumError;
};

class NonFiniteValue : public NumError {
 public:
  using NumError::NumError;
};

class NonScalarLoss : public NumError {
 public:
  using NumError::NumError;
};

class TapeConsumed : public NumError {
 public:
  using NumError::NumError;
};

class MissingGradient : public NumError {
 public:
  using NumError::NumError;
};

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Rank 0 (scalar), 1 (vector) and 2 (matrix)
/// are the only ranks the ops understand.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> d);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> d);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> d);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols(), cols()};
  }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }

  bool operator==(const Tensor&) const = default;
};

bool all_finite(std::span<const double> values);

/// A named learnable (or frozen) tensor. `grad` stays empty until something
/// writes a gradient into it; `requires_grad == false` makes the tape treat the
/// parameter as a constant.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> grad;
  bool requires_grad = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool trainable = true)
      : name(std::move(n)), value(std::move(v)), requires_grad(trainable) {}

  bool has_grad() const { return grad.size() == value.size(); }
  void zero_grad() { grad.assign(value.size(), 0.0); }
};

}  // namespace tvc::num

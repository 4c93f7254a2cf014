#include "tvc/numcore/tensor.hpp"

#include <cmath>
#include <sstream>

namespace tvc::num {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(numel(shape), fill) {
  for (auto d : shape) {
    if (d == 0) throw ShapeMismatch("tensor dimensions must be positive: " + shape_str(shape));
  }
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != numel(shape)) {
    throw ShapeMismatch("tensor data size " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::vector(std::vector<double> d) {
  const std::size_t n = d.size();
  return Tensor(Shape{n}, std::move(d));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> d) {
  return Tensor(Shape{rows, cols}, std::move(d));
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace tvc::num

#include "vog/tensor.hpp"

#include <cmath>
#include <sstream>

#include "vog/errors.hpp"

namespace vog {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extent must be positive, got shape " + shape_string(shape));
  }
  Tensor t;
  t.data.assign(shape_numel(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_string(shape));
  }
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extent must be positive, got shape " + shape_string(shape));
  }
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(values);
  return t;
}

void Tensor::ensure_finite(const std::string& context) const {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw ValidationError(context + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

}  // namespace vog

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vog {

// Dense row-major array of 64-bit floats. product(shape) == data.size() at
// all times; public operations keep every value finite.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values);

  std::size_t numel() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  // Throws ValidationError if any entry is NaN or infinite.
  void ensure_finite(const std::string& context) const;
};

std::string shape_string(const std::vector<std::size_t>& shape);

std::size_t shape_numel(const std::vector<std::size_t>& shape);

}  // namespace vog

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace latefuse {

// Dense row-major tensor of doubles. Double precision throughout: the
// gradient checks run at tolerances single precision cannot hold.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), values(numel(shape), 0.0) {}
  Tensor(std::vector<std::size_t> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (numel(shape) != values.size())
      throw std::runtime_error("tensor: shape does not match value count");
  }

  static std::size_t numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  std::size_t size() const { return values.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  double& at2(std::size_t i, std::size_t j) { return values[i * shape[1] + j]; }
  double at2(std::size_t i, std::size_t j) const { return values[i * shape[1] + j]; }

  double& at3(std::size_t i, std::size_t j, std::size_t k) {
    return values[(i * shape[1] + j) * shape[2] + k];
  }
  double at3(std::size_t i, std::size_t j, std::size_t k) const {
    return values[(i * shape[1] + j) * shape[2] + k];
  }

  void fill(double v) { std::fill(values.begin(), values.end(), v); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline bool all_finite(const Tensor& t) {
  for (double v : t.values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace latefuse

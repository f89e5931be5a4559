#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "hiergen/errors.hpp"

namespace hiergen {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

// Dense row-major tensor. Real is float (training) or double (gradient checks).
template <typename Real>
struct Tensor {
  Shape shape;
  std::vector<Real> data;

  Tensor() = default;
  explicit Tensor(Shape s, Real fill = Real(0)) : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(Shape s, std::vector<Real> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_size(shape))
      throw ShapeError("tensor of shape " + shape_string(shape) + " given " + std::to_string(data.size()) +
                       " values");
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape.front(); }
  // Product of all but the leading dimension.
  std::size_t cols() const { return shape.size() <= 1 ? (shape.empty() ? 1 : shape[0]) : data.size() / shape[0]; }

  Real& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  Real* row(std::size_t r) { return data.data() + r * cols(); }
  const Real* row(std::size_t r) const { return data.data() + r * cols(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape, std::vector<Other>(data.begin(), data.end()));
  }

  bool operator==(const Tensor&) const = default;
};

// Half-open column range [begin, end) marking one sentence in a row of encodings.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

// Throws ShapeError unless the spans are non-empty and tile [0, n) in order.
void check_partition(const std::vector<Span>& spans, std::size_t n);

}  // namespace hiergen

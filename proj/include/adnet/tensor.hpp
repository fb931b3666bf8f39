#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "adnet/errors.hpp"

namespace adnet {

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense n-dimensional array, row-major, with an optional accumulated
// gradient buffer of the same length.
template <typename Real>
struct TensorT {
  std::vector<std::size_t> shape;
  std::vector<Real> values;
  std::vector<Real> grad;  // empty or values.size() long

  TensorT() = default;

  TensorT(std::vector<std::size_t> s, std::vector<Real> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (shape_numel(shape) != values.size())
      throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                           std::to_string(values.size()) + " values");
    for (std::size_t d : shape)
      if (d == 0) throw DimensionError("tensor shape has a zero dimension");
  }

  static TensorT zeros(std::vector<std::size_t> s) {
    std::size_t n = shape_numel(s);
    return TensorT(std::move(s), std::vector<Real>(n, Real(0)));
  }

  static TensorT full(std::vector<std::size_t> s, Real fill) {
    std::size_t n = shape_numel(s);
    return TensorT(std::move(s), std::vector<Real>(n, fill));
  }

  static TensorT scalar(Real v) { return TensorT({1}, {v}); }

  std::size_t numel() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), Real(0));
  }

  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), Real(0));
  }

  bool all_finite() const {
    for (Real v : values)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  Real& at(std::initializer_list<std::size_t> idx) { return values[flat(idx)]; }
  Real at(std::initializer_list<std::size_t> idx) const { return values[flat(idx)]; }

  std::size_t flat(std::initializer_list<std::size_t> idx) const {
    std::size_t off = 0, i = 0;
    for (std::size_t v : idx) off = off * shape[i++] + v;
    return off;
  }
};

using Tensor = TensorT<double>;

}  // namespace adnet

#pragma once

#include <cmath>

#include "adnet/errors.hpp"
#include "adnet/rng.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

// Fan-in/fan-out for the two parameter layouts used by the network:
// conv kernels [Cout,Cin,3,3] and fully-connected weights [Din,Dout].
inline std::pair<std::size_t, std::size_t> xavier_fans(const std::vector<std::size_t>& shape) {
  if (shape.size() == 4) return {shape[1] * shape[2] * shape[3], shape[0] * shape[2] * shape[3]};
  if (shape.size() == 2) return {shape[0], shape[1]};
  throw DimensionError("xavier_fans: no fan convention for shape " + shape_str(shape));
}

// Uniform draw on [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
template <typename Real>
void xavier_fill(TensorT<Real>& t, std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Real& v : t.values) v = static_cast<Real>(rng.uniform(-a, a));
}

template <typename Real>
TensorT<Real> xavier_init(std::vector<std::size_t> shape, RngStream& rng) {
  auto t = TensorT<Real>::zeros(std::move(shape));
  auto [fin, fout] = xavier_fans(t.shape);
  xavier_fill(t, fin, fout, rng);
  return t;
}

}  // namespace adnet

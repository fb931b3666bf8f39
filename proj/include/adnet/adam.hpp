#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "adnet/errors.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

// Bias-corrected Adam over a fixed, ordered set of parameter tensors.
// First and second moments are kept per tensor, aligned with the parameter
// list passed to init(); update() consumes each tensor's grad buffer.
template <typename Real>
struct AdamT {
  Real learning_rate = Real(1e-4);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real epsilon = Real(1e-8);
  std::uint64_t step = 0;

  std::vector<std::vector<Real>> first_moment;
  std::vector<std::vector<Real>> second_moment;

  void init(const std::vector<TensorT<Real>*>& params) {
    first_moment.clear();
    second_moment.clear();
    step = 0;
    for (const auto* p : params) {
      first_moment.emplace_back(p->numel(), Real(0));
      second_moment.emplace_back(p->numel(), Real(0));
    }
  }

  void update(const std::vector<TensorT<Real>*>& params) {
    if (params.size() != first_moment.size())
      throw DimensionError("adam: parameter list length changed since init");
    ++step;
    const Real bc1 = Real(1) - std::pow(beta1, static_cast<Real>(step));
    const Real bc2 = Real(1) - std::pow(beta2, static_cast<Real>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      TensorT<Real>& p = *params[i];
      p.ensure_grad();
      auto& m = first_moment[i];
      auto& v = second_moment[i];
      if (m.size() != p.numel())
        throw DimensionError("adam: moment length " + std::to_string(m.size()) +
                             " != parameter length " + std::to_string(p.numel()));
      for (std::size_t j = 0; j < m.size(); ++j) {
        const Real g = p.grad[j];
        m[j] = beta1 * m[j] + (Real(1) - beta1) * g;
        v[j] = beta2 * v[j] + (Real(1) - beta2) * g * g;
        const Real mhat = m[j] / bc1;
        const Real vhat = v[j] / bc2;
        p.values[j] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
      }
    }
  }
};

using Adam = AdamT<double>;

}  // namespace adnet

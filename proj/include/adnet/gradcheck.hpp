#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adnet {

struct GradCheckOpResult {
  std::string op;
  double worst_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<GradCheckOpResult> ops;

  bool all_pass() const {
    for (const auto& r : ops)
      if (!r.pass) return false;
    return true;
  }
};

// Central finite-difference verification of every differentiable primitive
// over random small shapes, plus an end-to-end check of a tiny two-pathway
// network in each adaptive mode (50 randomly chosen parameters per mode).
// Real=float uses a larger step; pair it with a relaxed tolerance.
template <typename Real>
GradCheckReport run_gradient_checks(double tolerance, std::size_t shapes_per_op,
                                    std::uint64_t seed);

}  // namespace adnet

#pragma once

#include <vector>

#include "hook/rng.hpp"
#include "hook/tensor.hpp"

namespace hook::testing {

inline Tensor random_tensor(RngState& rng, const Shape& shape, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v), requires_grad);
}

// Random values bounded away from zero (for kinked activations).
inline Tensor random_tensor_no_kink(RngState& rng, const Shape& shape, double margin = 0.1) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) {
    double u = rng.uniform(margin, 1.0);
    x = rng.next_double() < 0.5 ? -u : u;
  }
  return Tensor(shape, std::move(v), true);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.vec().size(); ++i) {
    double d = a.vec()[i] - b.vec()[i];
    if (d < 0) d = -d;
    if (d > worst) worst = d;
  }
  return worst;
}

}  // namespace hook::testing

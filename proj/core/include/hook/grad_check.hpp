#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hook/tensor.hpp"

namespace hook {

struct GradCheckResult {
  std::string param;
  double max_rel_error;
};

// Compares analytic gradients of the scalar objective `f` against central
// finite differences, one parameter element at a time.
//
// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
// `f` must be deterministic; this is verified by running it twice and
// comparing bit-for-bit (DeterminismError otherwise). Gradients of `params`
// are left zeroed on return.
std::vector<GradCheckResult> grad_check(const std::function<Tensor()>& f,
                                        std::vector<Tensor> params, double eps = 1e-5);

// Convenience: largest error across all parameters.
double grad_check_max(const std::function<Tensor()>& f, std::vector<Tensor> params,
                      double eps = 1e-5);

}  // namespace hook

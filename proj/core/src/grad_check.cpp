#include "hook/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hook/autodiff.hpp"
#include "hook/errors.hpp"

namespace hook {

std::vector<GradCheckResult> grad_check(const std::function<Tensor()>& f,
                                        std::vector<Tensor> params, double eps) {
  if (eps <= 0.0) throw ContractError("grad_check: eps must be positive");

  auto run_value = [&]() {
    NoGradScope ng;
    return f().item();
  };

  const double v0 = run_value();
  const double v1 = run_value();
  if (std::memcmp(&v0, &v1, sizeof(double)) != 0)
    throw DeterminismError("grad_check: objective is not deterministic (" + std::to_string(v0) +
                           " vs " + std::to_string(v1) + ")");

  for (auto& p : params) p.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  std::vector<GradCheckResult> results;
  results.reserve(params.size());
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    double worst = 0.0;
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double saved = p.data()[i];
      p.data()[i] = saved + eps;
      const double up = run_value();
      p.data()[i] = saved - eps;
      const double dn = run_value();
      p.data()[i] = saved;
      const double numeric = (up - dn) / (2.0 * eps);
      const double a = analytic[pi][static_cast<size_t>(i)];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
    std::string name = p.name().empty() ? "param" + std::to_string(pi) : p.name();
    results.push_back({std::move(name), worst});
    p.zero_grad();
  }
  return results;
}

double grad_check_max(const std::function<Tensor()>& f, std::vector<Tensor> params, double eps) {
  double worst = 0.0;
  for (const auto& r : grad_check(f, std::move(params), eps))
    worst = std::max(worst, r.max_rel_error);
  return worst;
}

}  // namespace hook

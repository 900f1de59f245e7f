#pragma once

#include <cstdint>
#include <vector>

#include "hook/autodiff.hpp"
#include "hook/tensor.hpp"

namespace hook {

// Differentiable primitives. Every op validates shapes up front, computes
// the forward value into a fresh tensor, and registers itself on the
// active tape when some input participates in the graph.

// ---- linear algebra ------------------------------------------------------
// Batched matmul over the last two dims with numpy-style broadcasting of
// leading dims; `alpha` is fused into the product.
Tensor matmul(const Tensor& a, const Tensor& b, double alpha = 1.0);
// a · bᵀ: a [..., m, k] × b [..., n, k] → [..., m, n].
Tensor matmul_nt(const Tensor& a, const Tensor& b, double alpha = 1.0);

// ---- shape ---------------------------------------------------------------
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor transpose_last(const Tensor& x);  // swap the last two dims

// ---- elementwise (numpy-style broadcasting) ------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor relu(const Tensor& x);  // subgradient at 0 is 0
Tensor gelu(const Tensor& x);  // exact erf form

// ---- reductions ----------------------------------------------------------
Tensor sum(const Tensor& x, int axis);   // removes the axis
Tensor mean(const Tensor& x, int axis);  // removes the axis
Tensor sum_all(const Tensor& x);         // scalar [1]
Tensor mean_all(const Tensor& x);        // scalar [1]

// ---- normalization -------------------------------------------------------
// Max-subtracted softmax along `axis`; rows sum to 1.
Tensor softmax(const Tensor& x, int axis);
// Normalization over the last axis; gamma/beta have that axis's extent.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

struct BatchNormState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
};

// x is [B, C, H, W]. Train mode normalizes by batch statistics (biased
// variance) and updates running stats with `momentum` unless
// `update_running` is false; eval mode normalizes by running stats.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, bool training, double momentum = 0.1,
                   double eps = 1e-5, bool update_running = true);

// ---- convolution ---------------------------------------------------------
// Patch extraction: [B, C, H, W] → [B·Ho·Wo, C·k·k], zero padding.
Tensor im2col(const Tensor& x, int k, int stride, int padding);
// Cross-correlation plus per-channel bias. Accepts [C, H, W] or [B, C, H, W];
// weight is [Cout, Cin, k, k]. Ho = floor((H + 2p - k)/stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);

// ---- resampling ----------------------------------------------------------
// Half-pixel-center bilinear interpolation (align_corners = false).
Tensor bilinear_upsample(const Tensor& x, int64_t out_h, int64_t out_w);

// ---- losses --------------------------------------------------------------
// Mean negative log-softmax of the true class, stable via log-sum-exp.
// logits [B, K] with labels.size() == B, or [B, K, H, W] with
// labels.size() == B·H·W in row-major (b, y, x) order.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// ---- MAC instrumentation -------------------------------------------------
// While a counter is in scope, every forward matmul adds its exact
// multiply-accumulate count. Normalizations, activations and bias adds
// contribute zero by convention.
struct MacCounter {
  uint64_t macs = 0;
};

class MacCounterScope {
 public:
  explicit MacCounterScope(MacCounter& c);
  ~MacCounterScope();
  MacCounterScope(const MacCounterScope&) = delete;
  MacCounterScope& operator=(const MacCounterScope&) = delete;

 private:
  MacCounter* prev_;
};

}  // namespace hook

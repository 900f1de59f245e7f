#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "hook/autodiff.hpp"
#include "hook/errors.hpp"
#include "hook/grad_check.hpp"
#include "hook/ops.hpp"
#include "hook/rng.hpp"
#include "hook/tensor.hpp"
#include "test_util.hpp"

using namespace hook;
using hook::testing::max_abs_diff;
using hook::testing::random_tensor;
using hook::testing::random_tensor_no_kink;

namespace {

// Finite-difference harness: loss = sum(C ⊙ op(inputs)) with fixed random C,
// so every output element receives a distinct upstream gradient. Probe
// weights are bounded away from zero to keep the relative error meaningful.
double fd_check(const std::function<Tensor()>& fwd, std::vector<Tensor> params, RngState& rng,
                double eps = 1e-5) {
  Tensor probe;
  {
    NoGradScope ng;
    probe = fwd();
  }
  Tensor weights = random_tensor_no_kink(rng, probe.shape(), 0.5);
  weights.set_requires_grad(false);
  auto loss = [&]() { return sum_all(mul(fwd(), weights)); };
  return grad_check_max(loss, std::move(params), eps);
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
  Tensor I(Shape{2, 2}, {1, 0, 0, 1});
  Tensor A(Shape{2, 2}, {3, 4, 5, 6});
  Tensor r = matmul(I, A);
  CHECK(r.vec() == std::vector<double>{3, 4, 5, 6});

  Tensor a(Shape{1, 2}, {1, 2});
  Tensor b(Shape{2, 1}, {3, 4});
  CHECK(matmul(a, b).item() == doctest::Approx(11.0));
}

TEST_CASE("matmul with identity is bitwise exact") {
  RngState rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    int64_t n = 2 + trial;
    Tensor I(Shape{n, n}, 0.0);
    for (int64_t i = 0; i < n; ++i) I.at({i, i}) = 1.0;
    Tensor A = random_tensor(rng, {n, n + 1}, -10.0, 10.0);
    Tensor r = matmul(I, A);
    CHECK(std::memcmp(r.data(), A.data(), sizeof(double) * A.numel()) == 0);
  }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a(Shape{2, 3}, 1.0);
  Tensor b(Shape{4, 2}, 1.0);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2, 3]"), DimensionError);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[4, 2]"), DimensionError);
}

TEST_CASE("matmul gradient matches finite differences") {
  RngState rng(7);
  Tensor a = random_tensor(rng, {3, 4}, -1, 1, true);
  Tensor b = random_tensor(rng, {4, 2}, -1, 1, true);
  auto loss = [&]() { return sum_all(matmul(a, b)); };
  CHECK(grad_check_max(loss, {a, b}, 1e-5) < 1e-6);
}

TEST_CASE("batched matmul with broadcast leading dims") {
  RngState rng(13);
  Tensor a = random_tensor(rng, {2, 3, 4, 5});
  Tensor b = random_tensor(rng, {1, 3, 5, 2});
  Tensor r = matmul(a, b);
  CHECK(r.shape() == Shape{2, 3, 4, 2});
  // spot-check one slab against the 2-D op
  Tensor a11(Shape{4, 5}, 0.0), b1(Shape{5, 2}, 0.0);
  for (int64_t i = 0; i < 4; ++i)
    for (int64_t j = 0; j < 5; ++j) a11.at({i, j}) = a.at({1, 2, i, j});
  for (int64_t i = 0; i < 5; ++i)
    for (int64_t j = 0; j < 2; ++j) b1.at({i, j}) = b.at({0, 2, i, j});
  Tensor ref = matmul(a11, b1);
  for (int64_t i = 0; i < 4; ++i)
    for (int64_t j = 0; j < 2; ++j)
      CHECK(r.at({1, 2, i, j}) == doctest::Approx(ref.at({i, j})).epsilon(1e-12));

  Tensor ag = random_tensor(rng, {2, 2, 3, 4}, -1, 1, true);
  Tensor bg = random_tensor(rng, {4, 2}, -1, 1, true);
  auto loss = [&]() { return sum_all(matmul(ag, bg)); };
  CHECK(grad_check_max(loss, {ag, bg}, 1e-5) < 1e-6);
}

TEST_CASE("matmul_nt equals matmul with transposed operand") {
  RngState rng(17);
  Tensor a = random_tensor(rng, {3, 6, 4});
  Tensor b = random_tensor(rng, {3, 5, 4});
  Tensor r1 = matmul_nt(a, b, 0.5);
  Tensor r2 = matmul(a, transpose_last(b), 0.5);
  CHECK(max_abs_diff(r1, r2) < 1e-12);

  Tensor ag = random_tensor(rng, {2, 3, 4}, -1, 1, true);
  Tensor bg = random_tensor(rng, {2, 5, 4}, -1, 1, true);
  RngState wrng(18);
  CHECK(fd_check([&]() { return matmul_nt(ag, bg, 1.7); }, {ag, bg}, wrng) < 1e-6);
}

TEST_CASE("conv2d window-sum and affine hand cases") {
  Tensor x(Shape{1, 4, 4}, 1.0);
  Tensor w(Shape{1, 1, 2, 2}, 1.0);
  Tensor b(Shape{1}, 0.0);
  Tensor r = conv2d(x, w, b, 2, 0);
  CHECK(r.shape() == Shape{1, 2, 2});
  for (double v : r.vec()) CHECK(v == doctest::Approx(4.0));

  Tensor x2(Shape{1, 2, 2}, {1, 2, 3, 4});
  Tensor w2(Shape{1, 1, 1, 1}, {2});
  Tensor b2(Shape{1}, {1});
  Tensor r2 = conv2d(x2, w2, b2, 1, 0);
  for (int64_t i = 0; i < 4; ++i)
    CHECK(r2.vec()[i] == doctest::Approx(2.0 * x2.vec()[i] + 1.0));
}

namespace {

// Direct six-nested-loop cross-correlation oracle.
Tensor conv2d_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  const int64_t Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int64_t Cout = w.dim(0), k = w.dim(2);
  const int64_t Ho = (H + 2 * padding - k) / stride + 1;
  const int64_t Wo = (W + 2 * padding - k) / stride + 1;
  Tensor out(Shape{Cout, Ho, Wo}, 0.0);
  for (int64_t co = 0; co < Cout; ++co)
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox) {
        double acc = b.vec()[static_cast<size_t>(co)];
        for (int64_t ci = 0; ci < Cin; ++ci)
          for (int64_t ky = 0; ky < k; ++ky)
            for (int64_t kx = 0; kx < k; ++kx) {
              int64_t iy = oy * stride - padding + ky;
              int64_t ix = ox * stride - padding + kx;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += x.at({ci, iy, ix}) * w.at({co, ci, ky, kx});
            }
        out.at({co, oy, ox}) = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("conv2d matches naive loop oracle") {
  RngState rng(23);
  Tensor x = random_tensor(rng, {2, 8, 8});
  Tensor w = random_tensor(rng, {3, 2, 3, 3});
  Tensor b = random_tensor(rng, {3});
  Tensor got = conv2d(x, w, b, 1, 1);
  Tensor want = conv2d_oracle(x, w, b, 1, 1);
  CHECK(got.shape() == want.shape());
  CHECK(max_abs_diff(got, want) < 1e-9);
}

TEST_CASE("conv2d oracle agreement over random instances") {
  RngState rng(29);
  struct Case {
    int64_t cin, h, w, cout;
    int k, stride, pad;
  };
  const Case cases[] = {
      {1, 4, 4, 1, 2, 2, 0}, {2, 8, 8, 3, 3, 1, 1},  {3, 6, 10, 2, 2, 2, 0},
      {4, 8, 16, 2, 3, 1, 1}, {2, 16, 16, 4, 2, 2, 0}, {1, 5, 5, 2, 3, 2, 1},
  };
  for (const auto& c : cases) {
    Tensor x = random_tensor(rng, {c.cin, c.h, c.w});
    Tensor w = random_tensor(rng, {c.cout, c.cin, c.k, c.k});
    Tensor b = random_tensor(rng, {c.cout});
    Tensor got = conv2d(x, w, b, c.stride, c.pad);
    Tensor want = conv2d_oracle(x, w, b, c.stride, c.pad);
    REQUIRE(got.shape() == want.shape());
    CHECK(max_abs_diff(got, want) < 1e-9);
  }
}

TEST_CASE("conv2d channel mismatch raises dimension error") {
  Tensor x(Shape{2, 4, 4}, 1.0);
  Tensor w(Shape{1, 3, 2, 2}, 1.0);
  Tensor b(Shape{1}, 0.0);
  CHECK_THROWS_AS(conv2d(x, w, b, 1, 0), DimensionError);
}

TEST_CASE("conv2d gradients match finite differences") {
  RngState rng(31);
  Tensor x = random_tensor(rng, {1, 2, 6, 6}, -1, 1, true);
  Tensor w = random_tensor(rng, {2, 2, 3, 3}, -0.5, 0.5, true);
  Tensor b = random_tensor(rng, {2}, -0.5, 0.5, true);
  RngState wrng(32);
  CHECK(fd_check([&]() { return conv2d(x, w, b, 2, 1); }, {x, w, b}, wrng) < 1e-6);
}

TEST_CASE("batchnorm2d train-mode hand cases") {
  BatchNormState st{Tensor(Shape{2}, 0.0), Tensor(Shape{2}, 1.0)};
  Tensor gamma(Shape{2}, 1.0);
  Tensor beta(Shape{2}, 0.0);

  // constant channel: variance clamps to eps, output all zeros
  Tensor x(Shape{2, 2, 2, 2}, 3.5);
  Tensor y = batchnorm2d(x, gamma, beta, st, true);
  for (double v : y.vec()) CHECK(v == doctest::Approx(0.0));

  // gamma = 0 -> output equals beta
  RngState rng(37);
  Tensor x2 = random_tensor(rng, {2, 2, 3, 3});
  Tensor g0(Shape{2}, 0.0);
  Tensor b2(Shape{2}, {0.25, -1.5});
  Tensor y2 = batchnorm2d(x2, g0, b2, st, true);
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t c = 0; c < 2; ++c)
      for (int64_t i = 0; i < 9; ++i)
        CHECK(y2.vec()[static_cast<size_t>((b * 2 + c) * 9 + i)] ==
              doctest::Approx(b2.vec()[static_cast<size_t>(c)]));
}

TEST_CASE("batchnorm2d output statistics are normalized") {
  RngState rng(41);
  Tensor x = random_tensor(rng, {2, 3, 4, 4}, -2, 5);
  BatchNormState st{Tensor(Shape{3}, 0.0), Tensor(Shape{3}, 1.0)};
  Tensor gamma(Shape{3}, 1.0);
  Tensor beta(Shape{3}, 0.0);
  Tensor y = batchnorm2d(x, gamma, beta, st, true, 0.1, 1e-9);
  for (int64_t c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t i = 0; i < 16; ++i) m += y.at({b, c, i / 4, i % 4});
    m /= 32.0;
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t i = 0; i < 16; ++i) {
        double d = y.at({b, c, i / 4, i % 4}) - m;
        v += d * d;
      }
    v /= 32.0;
    CHECK(std::fabs(m) < 1e-6);
    CHECK(std::fabs(v - 1.0) < 1e-6);
  }
}

TEST_CASE("batchnorm2d running stats feed eval mode") {
  RngState rng(43);
  Tensor x = random_tensor(rng, {4, 2, 3, 3}, -1, 3);
  BatchNormState st{Tensor(Shape{2}, 0.0), Tensor(Shape{2}, 1.0)};
  Tensor gamma(Shape{2}, 1.0), beta(Shape{2}, 0.0);
  // momentum 1.0 copies the batch statistics into the running buffers
  batchnorm2d(x, gamma, beta, st, true, 1.0);
  Tensor y_eval = batchnorm2d(x, gamma, beta, st, false);
  Tensor y_train = batchnorm2d(x, gamma, beta, st, true, 0.0);
  CHECK(max_abs_diff(y_eval, y_train) < 1e-9);
}

TEST_CASE("batchnorm2d gradients match finite differences") {
  RngState rng(47);
  Tensor x = random_tensor(rng, {2, 2, 3, 3}, -1, 1, true);
  Tensor gamma = random_tensor(rng, {2}, 0.5, 1.5, true);
  Tensor beta = random_tensor(rng, {2}, -0.5, 0.5, true);
  BatchNormState st{Tensor(Shape{2}, 0.0), Tensor(Shape{2}, 1.0)};
  RngState wrng(48);
  CHECK(fd_check([&]() { return batchnorm2d(x, gamma, beta, st, true, 0.1, 1e-5, false); },
                 {x, gamma, beta}, wrng) < 1e-6);
  // eval mode
  RngState wrng2(49);
  CHECK(fd_check([&]() { return batchnorm2d(x, gamma, beta, st, false); }, {x, gamma, beta},
                 wrng2) < 1e-6);
}

TEST_CASE("softmax symmetry, stability, normalization") {
  Tensor x(Shape{3}, {0, 0, 0});
  Tensor y = softmax(x, 0);
  for (double v : y.vec()) CHECK(v == doctest::Approx(1.0 / 3.0));

  Tensor big(Shape{2}, {1000, 0});
  Tensor yb = softmax(big, 0);
  CHECK(yb.vec()[0] == doctest::Approx(1.0));
  CHECK(yb.vec()[1] == doctest::Approx(0.0));
  CHECK(all_finite(yb));

  RngState rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor r = random_tensor(rng, {4, 5}, -30, 30);
    Tensor s = softmax(r, 1);
    for (int64_t i = 0; i < 4; ++i) {
      double row = 0.0;
      for (int64_t j = 0; j < 5; ++j) {
        double v = s.at({i, j});
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        row += v;
      }
      CHECK(std::fabs(row - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("softmax gradient matches finite differences") {
  RngState rng(59);
  Tensor x = random_tensor(rng, {4, 5}, -2, 2, true);
  RngState wrng(60);
  CHECK(fd_check([&]() { return softmax(x, 1); }, {x}, wrng) < 1e-6);
  // non-trailing axis
  Tensor x2 = random_tensor(rng, {3, 4, 2}, -2, 2, true);
  RngState wrng2(61);
  CHECK(fd_check([&]() { return softmax(x2, 1); }, {x2}, wrng2) < 1e-6);
}

TEST_CASE("elementwise family hand cases") {
  Tensor x(Shape{3}, {-1, 0, 2});
  Tensor y = relu(x);
  CHECK(y.vec() == std::vector<double>{0, 0, 2});

  Tensor c(Shape{4}, 7.0);
  Tensor g(Shape{4}, 1.0);
  Tensor b(Shape{4}, 0.0);
  Tensor ln = layernorm(c, g, b);
  for (double v : ln.vec()) CHECK(v == doctest::Approx(0.0));

  Tensor ones(Shape{3, 4}, 1.0);
  Tensor m = mean(ones, 0);
  CHECK(m.shape() == Shape{4});
  for (double v : m.vec()) CHECK(v == doctest::Approx(1.0));

  Tensor a(Shape{2, 3}, 1.0);
  Tensor bad(Shape{4}, 1.0);
  CHECK_THROWS_AS(add(a, bad), DimensionError);
}

TEST_CASE("broadcast add/mul against explicit expansion") {
  RngState rng(67);
  Tensor a = random_tensor(rng, {2, 3, 4});
  Tensor b = random_tensor(rng, {3, 1});
  Tensor r = add(a, b);
  REQUIRE(r.shape() == Shape{2, 3, 4});
  for (int64_t i = 0; i < 2; ++i)
    for (int64_t j = 0; j < 3; ++j)
      for (int64_t k = 0; k < 4; ++k)
        CHECK(r.at({i, j, k}) == doctest::Approx(a.at({i, j, k}) + b.at({j, 0})));
}

TEST_CASE("backward fills gradients and accumulates") {
  Tensor x(Shape{2, 3}, {1, -2, 3, 4, -5, 6}, true);
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = sum_all(x);
    tape.backward(loss);
  }
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));

  Tensor z(Shape{1}, {3.0}, true);
  z.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = sum_all(mul(z, z));
    tape.backward(loss);
    CHECK(z.grad()[0] == doctest::Approx(6.0));
    tape.backward(loss);  // repeated backward accumulates
    CHECK(z.grad()[0] == doctest::Approx(12.0));
  }

  Tensor nx(Shape{2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = relu(nx);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("per-primitive finite-difference sweep") {
  // >= 10 random shape/seed combinations per primitive family
  for (uint64_t seed = 100; seed < 110; ++seed) {
    RngState rng(seed);
    int64_t m = rng.uniform_int(2, 5), k = rng.uniform_int(2, 5), n = rng.uniform_int(2, 5);

    Tensor a = random_tensor(rng, {m, k}, -1, 1, true);
    Tensor b = random_tensor(rng, {k, n}, -1, 1, true);
    RngState w1(seed * 11 + 1);
    CHECK(fd_check([&]() { return matmul(a, b); }, {a, b}, w1) < 1e-6);

    Tensor u = random_tensor(rng, {m, n}, -1, 1, true);
    Tensor v = random_tensor(rng, {m, n}, -1, 1, true);
    RngState w2(seed * 11 + 2);
    CHECK(fd_check([&]() { return add(u, v); }, {u, v}, w2) < 1e-6);
    RngState w3(seed * 11 + 3);
    CHECK(fd_check([&]() { return mul(u, v); }, {u, v}, w3) < 1e-6);
    RngState w4(seed * 11 + 4);
    CHECK(fd_check([&]() { return sub(u, v); }, {u, v}, w4) < 1e-6);
    RngState w5(seed * 11 + 5);
    CHECK(fd_check([&]() { return scale(u, -1.7); }, {u}, w5) < 1e-6);

    Tensor rk = random_tensor_no_kink(rng, {m, n});
    RngState w6(seed * 11 + 6);
    CHECK(fd_check([&]() { return relu(rk); }, {rk}, w6) < 1e-6);
    RngState w7(seed * 11 + 7);
    CHECK(fd_check([&]() { return gelu(u); }, {u}, w7) < 1e-6);

    RngState w8(seed * 11 + 8);
    CHECK(fd_check([&]() { return sum(u, 0); }, {u}, w8) < 1e-6);
    RngState w9(seed * 11 + 9);
    CHECK(fd_check([&]() { return mean(u, 1); }, {u}, w9) < 1e-6);
    RngState w10(seed * 11 + 10);
    CHECK(fd_check([&]() { return mean_all(u); }, {u}, w10) < 1e-6);

    // layernorm rows of length >= 4: two-element rows can produce
    // near-cancelling true gradients where FD roundoff dominates the
    // relative error
    int64_t nn = rng.uniform_int(4, 8);
    Tensor gm = random_tensor(rng, {nn}, 0.5, 1.5, true);
    Tensor bt = random_tensor(rng, {nn}, -0.5, 0.5, true);
    Tensor lnin = random_tensor(rng, {m, nn}, -1, 1, true);
    RngState w11(seed * 11 + 11);
    CHECK(fd_check([&]() { return layernorm(lnin, gm, bt); }, {lnin, gm, bt}, w11) < 1e-6);

    Tensor p4 = random_tensor(rng, {2, m, k, n}, -1, 1, true);
    RngState w12(seed * 11 + 12);
    CHECK(fd_check([&]() { return permute(p4, {2, 0, 3, 1}); }, {p4}, w12) < 1e-6);
    RngState w13(seed * 11 + 13);
    CHECK(fd_check([&]() { return reshape(p4, Shape{m * k, 2 * n}); }, {p4}, w13) < 1e-6);

    RngState w14(seed * 11 + 14);
    CHECK(fd_check([&]() { return bilinear_upsample(p4, m * 2 + 1, n * 2); }, {p4}, w14) < 1e-6);

    RngState w15(seed * 11 + 15);
    CHECK(fd_check([&]() { return im2col(p4, 2, 1, 1); }, {p4}, w15) < 1e-6);

    RngState w16(seed * 11 + 16);
    CHECK(fd_check([&]() { return softmax(p4, 3); }, {p4}, w16) < 1e-6);
  }
}

TEST_CASE("cross entropy values and gradient") {
  // uniform logits over k classes -> ln(k)
  Tensor logits(Shape{2, 5}, 0.3);
  Tensor l = cross_entropy(logits, {1, 4});
  CHECK(l.item() == doctest::Approx(std::log(5.0)));

  // confident correct prediction -> loss ~ 0
  Tensor conf(Shape{1, 3}, {50.0, 0.0, 0.0});
  CHECK(cross_entropy(conf, {0}).item() == doctest::Approx(0.0).epsilon(1e-12));

  // gradient = (softmax - one_hot)/count
  RngState rng(71);
  Tensor lg = random_tensor(rng, {3, 4}, -2, 2, true);
  std::vector<int> labels{2, 0, 3};
  lg.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = cross_entropy(lg, labels);
    tape.backward(loss);
  }
  Tensor sm = softmax(lg, 1);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 4; ++j) {
      double want = (sm.at({i, j}) - (labels[static_cast<size_t>(i)] == j ? 1.0 : 0.0)) / 3.0;
      CHECK(lg.grad()[static_cast<size_t>(i * 4 + j)] == doctest::Approx(want).epsilon(1e-10));
    }

  auto f = [&]() { return cross_entropy(lg, labels); };
  CHECK(grad_check_max(f, {lg}, 1e-5) < 1e-6);

  // dense layout
  Tensor dl = random_tensor(rng, {2, 3, 2, 2}, -1, 1, true);
  std::vector<int> dlab{0, 1, 2, 0, 1, 1, 2, 0};
  auto fd = [&]() { return cross_entropy(dl, dlab); };
  CHECK(grad_check_max(fd, {dl}, 1e-5) < 1e-6);

  CHECK_THROWS_AS(cross_entropy(logits, {1, 9}), ContractError);
}

TEST_CASE("grad_check exactness and determinism detection") {
  // linear objective: central difference is exact up to roundoff
  Tensor wv(Shape{4}, {0.5, -1.0, 2.0, 0.25}, true);
  Tensor xv(Shape{4}, {1.0, 2.0, 3.0, 4.0});
  auto f = [&]() { return sum_all(mul(wv, xv)); };
  CHECK(grad_check_max(f, {wv}, 1e-5) < 1e-9);

  int calls = 0;
  Tensor p(Shape{1}, {1.0}, true);
  auto bad = [&]() {
    ++calls;
    return scale(p, static_cast<double>(calls));
  };
  CHECK_THROWS_AS(grad_check_max(bad, {p}, 1e-5), DeterminismError);
}

TEST_CASE("rng determinism") {
  RngState a(12345), b(12345);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RngState c(1), d(2);
  CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("tensor dump format round-trips exactly") {
  RngState rng(73);
  Tensor t = random_tensor(rng, {3, 5}, -1e6, 1e6);
  t.vec()[0] = 1.0 / 3.0;
  t.vec()[1] = -0.0;
  std::stringstream ss;
  dump_tensor(ss, t);
  Tensor back = parse_tensor(ss);
  REQUIRE(back.shape() == t.shape());
  CHECK(std::memcmp(back.data(), t.data(), sizeof(double) * t.numel()) == 0);

  std::stringstream bad("shape: 2 2\n1.0 2.0 3.0");
  CHECK_THROWS_AS(parse_tensor(bad), ParseError);
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor(Shape{2, 0}, 1.0), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{3}, std::vector<double>{1, 2}), DimensionError);
  Tensor t(Shape{2, 2}, {1, 2, 3, 4});
  CHECK(t.numel() == 4);
  CHECK_THROWS_AS(t.item(), ContractError);
}

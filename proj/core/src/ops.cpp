#include "hook/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hook/errors.hpp"

namespace hook {

namespace {

thread_local MacCounter* g_mac_counter = nullptr;

std::vector<double>& ensure_grad(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
  return t.grad;
}

// ---- matmul kernels; all accumulate into c -------------------------------

// c(m×n) += alpha · a(m×k) · b(k×n)
void mm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
           double alpha) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = alpha * arow[p];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c(m×n) += alpha · a(m×k) · b(n×k)ᵀ
void mm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
           double alpha) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += alpha * acc;
    }
  }
}

// c(k×n) += alpha · a(m×k)ᵀ · b(m×n)
void mm_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
           double alpha) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (int64_t p = 0; p < k; ++p) {
      double av = alpha * arow[p];
      double* crow = c + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// ---- broadcast helpers ----------------------------------------------------

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  size_t nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (size_t i = 0; i < nd; ++i) {
    int64_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
    int64_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
    if (da != db && da != 1 && db != 1)
      throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                           " are not broadcast-compatible");
    out[i] = std::max(da, db);
  }
  return out;
}

// Right-aligned strides of `in` against `out`, 0 where `in` is broadcast.
std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<int64_t> st(out.size(), 0);
  Shape in_strides = row_major_strides(in);
  size_t shift = out.size() - in.size();
  for (size_t i = 0; i < in.size(); ++i)
    st[shift + i] = (in[i] == 1 && out[shift + i] != 1) ? 0 : in_strides[i];
  return st;
}

// Row-major walk over `shape` maintaining two strided offsets.
template <typename F>
void walk2(const Shape& shape, const std::vector<int64_t>& sa, const std::vector<int64_t>& sb,
           F&& f) {
  int nd = static_cast<int>(shape.size());
  int64_t total = shape_numel(shape);
  std::vector<int64_t> idx(nd, 0);
  int64_t oa = 0, ob = 0;
  for (int64_t lin = 0; lin < total; ++lin) {
    f(lin, oa, ob);
    for (int d = nd - 1; d >= 0; --d) {
      oa += sa[d];
      ob += sb[d];
      if (++idx[d] < shape[d]) break;
      oa -= sa[d] * shape[d];
      ob -= sb[d] * shape[d];
      idx[d] = 0;
    }
  }
}

// Single-offset variant.
template <typename F>
void walk1(const Shape& shape, const std::vector<int64_t>& sa, F&& f) {
  int nd = static_cast<int>(shape.size());
  int64_t total = shape_numel(shape);
  std::vector<int64_t> idx(nd, 0);
  int64_t oa = 0;
  for (int64_t lin = 0; lin < total; ++lin) {
    f(lin, oa);
    for (int d = nd - 1; d >= 0; --d) {
      oa += sa[d];
      if (++idx[d] < shape[d]) break;
      oa -= sa[d] * shape[d];
      idx[d] = 0;
    }
  }
}

// outer × len × inner decomposition around `axis`.
struct AxisSplit {
  int64_t outer, len, inner;
  int axis;
};

AxisSplit split_axis(const Shape& shape, int axis, const char* op) {
  int nd = static_cast<int>(shape.size());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd)
    throw DimensionError(std::string(op) + ": axis out of range for shape " + shape_str(shape));
  AxisSplit s{1, shape[axis], 1, axis};
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  for (int i = axis + 1; i < nd; ++i) s.inner *= shape[i];
  return s;
}

// ---- batched matmul bookkeeping -------------------------------------------

struct MmPlan {
  int64_t m, k, n;
  int64_t batches;
  Shape out_shape;
  std::vector<int64_t> a_slab, b_slab;  // matrix index per output batch
};

MmPlan plan_mm(const Shape& as, const Shape& bs, bool b_transposed, const char* op) {
  if (as.size() < 2 || bs.size() < 2)
    throw DimensionError(std::string(op) + ": operands must have >= 2 dims, got " + shape_str(as) +
                         " and " + shape_str(bs));
  MmPlan p;
  p.m = as[as.size() - 2];
  int64_t ka = as.back();
  int64_t kb = b_transposed ? bs.back() : bs[bs.size() - 2];
  p.n = b_transposed ? bs[bs.size() - 2] : bs.back();
  if (ka != kb)
    throw DimensionError(std::string(op) + ": inner extents disagree: " + shape_str(as) + " x " +
                         shape_str(bs));
  p.k = ka;
  Shape ab(as.begin(), as.end() - 2), bb(bs.begin(), bs.end() - 2);
  Shape obatch = broadcast_shapes(ab, bb, op);
  p.batches = shape_numel(obatch);
  p.a_slab.resize(static_cast<size_t>(p.batches));
  p.b_slab.resize(static_cast<size_t>(p.batches));
  if (obatch.empty()) {
    p.a_slab[0] = p.b_slab[0] = 0;
  } else {
    auto sa = broadcast_strides(ab, obatch);
    auto sb = broadcast_strides(bb, obatch);
    walk2(obatch, sa, sb, [&](int64_t lin, int64_t oa, int64_t ob) {
      p.a_slab[static_cast<size_t>(lin)] = oa;
      p.b_slab[static_cast<size_t>(lin)] = ob;
    });
  }
  p.out_shape = obatch;
  p.out_shape.push_back(p.m);
  p.out_shape.push_back(p.n);
  return p;
}

}  // namespace

MacCounterScope::MacCounterScope(MacCounter& c) : prev_(g_mac_counter) { g_mac_counter = &c; }
MacCounterScope::~MacCounterScope() { g_mac_counter = prev_; }

// ---- matmul ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, double alpha) {
  MmPlan p = plan_mm(a.shape(), b.shape(), false, "matmul");
  Tensor out(p.out_shape, 0.0);
  const double* ap = a.data();
  const double* bp = b.data();
  double* op = out.data();
  const int64_t mk = p.m * p.k, kn = p.k * p.n, mn = p.m * p.n;
  for (int64_t i = 0; i < p.batches; ++i)
    mm_nn(ap + p.a_slab[i] * mk, bp + p.b_slab[i] * kn, op + i * mn, p.m, p.k, p.n, alpha);
  if (g_mac_counter)
    g_mac_counter->macs += static_cast<uint64_t>(p.batches) * static_cast<uint64_t>(p.m) *
                           static_cast<uint64_t>(p.k) * static_cast<uint64_t>(p.n);
  if (detail::should_record({&a, &b})) {
    bool na = a.requires_grad(), nb = b.requires_grad();
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record("matmul", {&a, &b}, out, [=]() {
      const double* g = oi->grad.data();
      if (na) {
        double* ga = ensure_grad(*ai).data();
        const double* bd = bi->data.data();
        for (int64_t i = 0; i < p.batches; ++i)
          mm_nt(g + i * mn, bd + p.b_slab[i] * kn, ga + p.a_slab[i] * mk, p.m, p.n, p.k, alpha);
      }
      if (nb) {
        double* gb = ensure_grad(*bi).data();
        const double* ad = ai->data.data();
        for (int64_t i = 0; i < p.batches; ++i)
          mm_tn(ad + p.a_slab[i] * mk, g + i * mn, gb + p.b_slab[i] * kn, p.m, p.k, p.n, alpha);
      }
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b, double alpha) {
  MmPlan p = plan_mm(a.shape(), b.shape(), true, "matmul_nt");
  Tensor out(p.out_shape, 0.0);
  const double* ap = a.data();
  const double* bp = b.data();
  double* op = out.data();
  const int64_t mk = p.m * p.k, nk = p.n * p.k, mn = p.m * p.n;
  for (int64_t i = 0; i < p.batches; ++i)
    mm_nt(ap + p.a_slab[i] * mk, bp + p.b_slab[i] * nk, op + i * mn, p.m, p.k, p.n, alpha);
  if (g_mac_counter)
    g_mac_counter->macs += static_cast<uint64_t>(p.batches) * static_cast<uint64_t>(p.m) *
                           static_cast<uint64_t>(p.k) * static_cast<uint64_t>(p.n);
  if (detail::should_record({&a, &b})) {
    bool na = a.requires_grad(), nb = b.requires_grad();
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record("matmul_nt", {&a, &b}, out, [=]() {
      const double* g = oi->grad.data();
      if (na) {
        double* ga = ensure_grad(*ai).data();
        const double* bd = bi->data.data();
        // ga (m×k) += alpha · G (m×n) · B (n×k)
        for (int64_t i = 0; i < p.batches; ++i)
          mm_nn(g + i * mn, bd + p.b_slab[i] * nk, ga + p.a_slab[i] * mk, p.m, p.n, p.k, alpha);
      }
      if (nb) {
        double* gb = ensure_grad(*bi).data();
        const double* ad = ai->data.data();
        // gb (n×k) += alpha · Gᵀ (n×m) · A (m×k)
        for (int64_t i = 0; i < p.batches; ++i)
          mm_tn(g + i * mn, ad + p.a_slab[i] * mk, gb + p.b_slab[i] * nk, p.m, p.n, p.k, alpha);
      }
    });
  }
  return out;
}

// ---- shape ops -------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
  Tensor out(std::move(new_shape), x.vec());
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record("reshape", {&x}, out, [=]() {
      double* gx = ensure_grad(*xi).data();
      const double* g = oi->grad.data();
      for (size_t i = 0; i < oi->grad.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  int nd = x.ndim();
  if (static_cast<int>(axes.size()) != nd)
    throw DimensionError("permute: axes rank mismatch for shape " + shape_str(x.shape()));
  std::vector<bool> seen(nd, false);
  Shape out_shape(nd);
  for (int i = 0; i < nd; ++i) {
    int a = axes[i];
    if (a < 0 || a >= nd || seen[a]) throw DimensionError("permute: invalid axis list");
    seen[a] = true;
    out_shape[i] = x.shape()[a];
  }
  Shape xstrides = row_major_strides(x.shape());
  std::vector<int64_t> gather(nd);
  for (int i = 0; i < nd; ++i) gather[i] = xstrides[axes[i]];
  Tensor out(out_shape, 0.0);
  double* op = out.data();
  const double* xp = x.data();
  walk1(out_shape, gather, [&](int64_t lin, int64_t off) { op[lin] = xp[off]; });
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record("permute", {&x}, out, [=]() {
      double* gx = ensure_grad(*xi).data();
      const double* g = oi->grad.data();
      walk1(out_shape, gather, [&](int64_t lin, int64_t off) { gx[off] += g[lin]; });
    });
  }
  return out;
}

Tensor transpose_last(const Tensor& x) {
  int nd = x.ndim();
  if (nd < 2) throw DimensionError("transpose_last: needs >= 2 dims");
  std::vector<int> axes(nd);
  for (int i = 0; i < nd; ++i) axes[i] = i;
  std::swap(axes[nd - 1], axes[nd - 2]);
  return permute(x, axes);
}

// ---- elementwise -----------------------------------------------------------

namespace {

enum class EwKind { Add, Sub, Mul };

Tensor binary_ew(const Tensor& a, const Tensor& b, EwKind kind, const char* name) {
  Shape os = broadcast_shapes(a.shape(), b.shape(), name);
  Tensor out(os, 0.0);
  const double* ap = a.data();
  const double* bp = b.data();
  double* op = out.data();
  const int64_t total = out.numel();
  const bool same = a.shape() == b.shape() && a.shape() == os;
  auto apply = [kind](double x, double y) {
    switch (kind) {
      case EwKind::Add: return x + y;
      case EwKind::Sub: return x - y;
      default: return x * y;
    }
  };
  std::vector<int64_t> sa, sb;
  if (same) {
    for (int64_t i = 0; i < total; ++i) op[i] = apply(ap[i], bp[i]);
  } else {
    sa = broadcast_strides(a.shape(), os);
    sb = broadcast_strides(b.shape(), os);
    walk2(os, sa, sb,
          [&](int64_t lin, int64_t oa, int64_t ob) { op[lin] = apply(ap[oa], bp[ob]); });
  }
  if (detail::should_record({&a, &b})) {
    bool na = a.requires_grad(), nb = b.requires_grad();
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    detail::record(name, {&a, &b}, out, [=]() {
      const double* g = oi->grad.data();
      if (same) {
        if (na) {
          double* ga = ensure_grad(*ai).data();
          for (int64_t i = 0; i < total; ++i)
            ga[i] += kind == EwKind::Mul ? g[i] * bi->data[static_cast<size_t>(i)] : g[i];
        }
        if (nb) {
          double* gb = ensure_grad(*bi).data();
          for (int64_t i = 0; i < total; ++i) {
            double gv = g[i];
            if (kind == EwKind::Mul)
              gv *= ai->data[static_cast<size_t>(i)];
            else if (kind == EwKind::Sub)
              gv = -gv;
            gb[i] += gv;
          }
        }
      } else {
        double* ga = na ? ensure_grad(*ai).data() : nullptr;
        double* gb = nb ? ensure_grad(*bi).data() : nullptr;
        const double* ad = ai->data.data();
        const double* bd = bi->data.data();
        walk2(os, sa, sb, [&](int64_t lin, int64_t oa, int64_t ob) {
          double gv = g[lin];
          if (ga) ga[oa] += kind == EwKind::Mul ? gv * bd[ob] : gv;
          if (gb) gb[ob] += kind == EwKind::Mul ? gv * ad[oa] : (kind == EwKind::Sub ? -gv : gv);
        });
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_ew(a, b, EwKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_ew(a, b, EwKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_ew(a, b, EwKind::Mul, "mul"); }

Tensor scale(const Tensor& x, double c) {
  Tensor out(x.shape(), 0.0);
  const double* xp = x.data();
  double* op = out.data();
  const int64_t total = x.numel();
  for (int64_t i = 0; i < total; ++i) op[i] = c * xp[i];
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record("scale", {&x}, out, [=]() {
      double* gx = ensure_grad(*xi).data();
      const double* g = oi->grad.data();
      for (int64_t i = 0; i < total; ++i) gx[i] += c * g[i];
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape(), 0.0);
  const double* xp = x.data();
  double* op = out.data();
  const int64_t total = x.numel();
  for (int64_t i = 0; i < total; ++i) op[i] = xp[i] > 0.0 ? xp[i] : 0.0;
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record("relu", {&x}, out, [=]() {
      double* gx = ensure_grad(*xi).data();
      const double* g = oi->grad.data();
      const double* xd = xi->data.data();
      for (int64_t i = 0; i < total; ++i)
        if (xd[i] > 0.0) gx[i] += g[i];
    });
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  Tensor out(x.shape(), 0.0);
  const double* xp = x.data();
  double* op = out.data();
  const int64_t total = x.numel();
  for (int64_t i = 0; i < total; ++i) op[i] = 0.5 * xp[i] * (1.0 + std::erf(xp[i] * inv_sqrt2));
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record("gelu", {&x}, out, [=]() {
      double* gx = ensure_grad(*xi).data();
      const double* g = oi->grad.data();
      const double* xd = xi->data.data();
      for (int64_t i = 0; i < total; ++i) {
        double cdf = 0.5 * (1.0 + std::erf(xd[i] * inv_sqrt2));
        double pdf = inv_sqrt2pi * std::exp(-0.5 * xd[i] * xd[i]);
        gx[i] += g[i] * (cdf + xd[i] * pdf);
      }
    });
  }
  return out;
}

// ---- reductions -------------------------------------------------------------

namespace {

Tensor reduce_axis(const Tensor& x, int axis, bool take_mean, const char* name) {
  AxisSplit s = split_axis(x.shape(), axis, name);
  Shape os;
  for (int i = 0; i < x.ndim(); ++i)
    if (i != s.axis) os.push_back(x.shape()[i]);
  if (os.empty()) os.push_back(1);
  Tensor out(os, 0.0);
  const double* xp = x.data();
  double* op = out.data();
  const double w = take_mean ? 1.0 / static_cast<double>(s.len) : 1.0;
  for (int64_t o = 0; o < s.outer; ++o)
    for (int64_t l = 0; l < s.len; ++l) {
      const double* src = xp + (o * s.len + l) * s.inner;
      double* dst = op + o * s.inner;
      for (int64_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  if (take_mean)
    for (int64_t i = 0; i < out.numel(); ++i) op[i] *= w;
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record(name, {&x}, out, [=]() {
      double* gx = ensure_grad(*xi).data();
      const double* g = oi->grad.data();
      for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t l = 0; l < s.len; ++l) {
          double* dst = gx + (o * s.len + l) * s.inner;
          const double* src = g + o * s.inner;
          for (int64_t i = 0; i < s.inner; ++i) dst[i] += w * src[i];
        }
    });
  }
  return out;
}

}  // namespace

Tensor sum(const Tensor& x, int axis) { return reduce_axis(x, axis, false, "sum"); }
Tensor mean(const Tensor& x, int axis) { return reduce_axis(x, axis, true, "mean"); }

namespace {

Tensor reduce_all(const Tensor& x, bool take_mean, const char* name) {
  const double w = take_mean ? 1.0 / static_cast<double>(x.numel()) : 1.0;
  double acc = 0.0;
  const double* xp = x.data();
  const int64_t total = x.numel();
  for (int64_t i = 0; i < total; ++i) acc += xp[i];
  Tensor out = Tensor::scalar(acc * w);
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record(name, {&x}, out, [=]() {
      double* gx = ensure_grad(*xi).data();
      const double g = oi->grad[0] * w;
      for (int64_t i = 0; i < total; ++i) gx[i] += g;
    });
  }
  return out;
}

}  // namespace

Tensor sum_all(const Tensor& x) { return reduce_all(x, false, "sum_all"); }
Tensor mean_all(const Tensor& x) { return reduce_all(x, true, "mean_all"); }

// ---- softmax ----------------------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
  AxisSplit s = split_axis(x.shape(), axis, "softmax");
  Tensor out(x.shape(), 0.0);
  const double* xp = x.data();
  double* op = out.data();
  for (int64_t o = 0; o < s.outer; ++o)
    for (int64_t in = 0; in < s.inner; ++in) {
      const int64_t base = o * s.len * s.inner + in;
      double mx = xp[base];
      for (int64_t l = 1; l < s.len; ++l) mx = std::max(mx, xp[base + l * s.inner]);
      double z = 0.0;
      for (int64_t l = 0; l < s.len; ++l) {
        double e = std::exp(xp[base + l * s.inner] - mx);
        op[base + l * s.inner] = e;
        z += e;
      }
      double inv = 1.0 / z;
      for (int64_t l = 0; l < s.len; ++l) op[base + l * s.inner] *= inv;
    }
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record("softmax", {&x}, out, [=]() {
      double* gx = ensure_grad(*xi).data();
      const double* g = oi->grad.data();
      const double* y = oi->data.data();
      for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t in = 0; in < s.inner; ++in) {
          const int64_t base = o * s.len * s.inner + in;
          double dot = 0.0;
          for (int64_t l = 0; l < s.len; ++l) {
            const int64_t idx = base + l * s.inner;
            dot += g[idx] * y[idx];
          }
          for (int64_t l = 0; l < s.len; ++l) {
            const int64_t idx = base + l * s.inner;
            gx[idx] += y[idx] * (g[idx] - dot);
          }
        }
    });
  }
  return out;
}

// ---- layernorm ----------------------------------------------------------------

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const int64_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d)
    throw DimensionError("layernorm: gamma/beta must have extent " + std::to_string(d) +
                         ", got " + shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
  const int64_t rows = x.numel() / d;
  Tensor out(x.shape(), 0.0);
  std::vector<double> mu(static_cast<size_t>(rows)), inv_std(static_cast<size_t>(rows));
  const double* xp = x.data();
  const double* gp = gamma.data();
  const double* bp = beta.data();
  double* op = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = xp + r * d;
    double m = 0.0;
    for (int64_t j = 0; j < d; ++j) m += row[j];
    m /= static_cast<double>(d);
    double v = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      double c = row[j] - m;
      v += c * c;
    }
    v /= static_cast<double>(d);
    double is = 1.0 / std::sqrt(v + eps);
    mu[static_cast<size_t>(r)] = m;
    inv_std[static_cast<size_t>(r)] = is;
    double* orow = op + r * d;
    for (int64_t j = 0; j < d; ++j) orow[j] = gp[j] * (row[j] - m) * is + bp[j];
  }
  if (detail::should_record({&x, &gamma, &beta})) {
    bool nx = x.requires_grad(), ng = gamma.requires_grad(), nb = beta.requires_grad();
    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
    detail::record("layernorm", {&x, &gamma, &beta}, out, [=]() {
      const double* g = oi->grad.data();
      const double* xd = xi->data.data();
      const double* gm = gi->data.data();
      double* gx = nx ? ensure_grad(*xi).data() : nullptr;
      double* gg = ng ? ensure_grad(*gi).data() : nullptr;
      double* gb = nb ? ensure_grad(*bi).data() : nullptr;
      std::vector<double> xhat(static_cast<size_t>(d));
      for (int64_t r = 0; r < rows; ++r) {
        const double* grow = g + r * d;
        const double* xrow = xd + r * d;
        const double m = mu[static_cast<size_t>(r)];
        const double is = inv_std[static_cast<size_t>(r)];
        double m1 = 0.0, m2 = 0.0;
        for (int64_t j = 0; j < d; ++j) {
          xhat[static_cast<size_t>(j)] = (xrow[j] - m) * is;
          double gh = grow[j] * gm[j];
          m1 += gh;
          m2 += gh * xhat[static_cast<size_t>(j)];
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        for (int64_t j = 0; j < d; ++j) {
          double xh = xhat[static_cast<size_t>(j)];
          if (gx) gx[r * d + j] += is * (grow[j] * gm[j] - m1 - xh * m2);
          if (gg) gg[j] += grow[j] * xh;
          if (gb) gb[j] += grow[j];
        }
      }
    });
  }
  return out;
}

// ---- batchnorm -------------------------------------------------------------

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, bool training, double momentum, double eps,
                   bool update_running) {
  if (x.ndim() != 4)
    throw DimensionError("batchnorm2d: expected [B, C, H, W], got " + shape_str(x.shape()));
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (gamma.numel() != C || beta.numel() != C)
    throw DimensionError("batchnorm2d: gamma/beta extent must equal channel count " +
                         std::to_string(C));
  if (state.running_mean.numel() != C || state.running_var.numel() != C)
    throw DimensionError("batchnorm2d: running stats extent must equal channel count");
  const int64_t plane = H * W;
  const int64_t per_channel = B * plane;
  if (training && per_channel < 1)
    throw ContractError("batchnorm2d: degenerate batch (no elements per channel)");

  std::vector<double> mu(static_cast<size_t>(C)), inv_std(static_cast<size_t>(C));
  const double* xp = x.data();
  if (training) {
    for (int64_t c = 0; c < C; ++c) {
      double m = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const double* src = xp + (b * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) m += src[i];
      }
      m /= static_cast<double>(per_channel);
      double v = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const double* src = xp + (b * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          double d = src[i] - m;
          v += d * d;
        }
      }
      v /= static_cast<double>(per_channel);  // biased estimator
      mu[static_cast<size_t>(c)] = m;
      inv_std[static_cast<size_t>(c)] = 1.0 / std::sqrt(v + eps);
      if (update_running) {
        double& rm = state.running_mean.vec()[static_cast<size_t>(c)];
        double& rv = state.running_var.vec()[static_cast<size_t>(c)];
        rm = (1.0 - momentum) * rm + momentum * m;
        rv = (1.0 - momentum) * rv + momentum * v;
      }
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      mu[static_cast<size_t>(c)] = state.running_mean.vec()[static_cast<size_t>(c)];
      inv_std[static_cast<size_t>(c)] =
          1.0 / std::sqrt(state.running_var.vec()[static_cast<size_t>(c)] + eps);
    }
  }

  Tensor out(x.shape(), 0.0);
  double* op = out.data();
  const double* gp = gamma.data();
  const double* bp = beta.data();
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      const double* src = xp + (b * C + c) * plane;
      double* dst = op + (b * C + c) * plane;
      const double m = mu[static_cast<size_t>(c)];
      const double is = inv_std[static_cast<size_t>(c)];
      const double gv = gp[c], bv = bp[c];
      for (int64_t i = 0; i < plane; ++i) dst[i] = gv * (src[i] - m) * is + bv;
    }

  if (detail::should_record({&x, &gamma, &beta})) {
    bool nx = x.requires_grad(), ng = gamma.requires_grad(), nb = beta.requires_grad();
    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
    detail::record("batchnorm2d", {&x, &gamma, &beta}, out, [=]() {
      const double* g = oi->grad.data();
      const double* xd = xi->data.data();
      const double* gm = gi->data.data();
      double* gx = nx ? ensure_grad(*xi).data() : nullptr;
      double* gg = ng ? ensure_grad(*gi).data() : nullptr;
      double* gb = nb ? ensure_grad(*bi).data() : nullptr;
      for (int64_t c = 0; c < C; ++c) {
        const double m = mu[static_cast<size_t>(c)];
        const double is = inv_std[static_cast<size_t>(c)];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int64_t b = 0; b < B; ++b) {
          const double* grow = g + (b * C + c) * plane;
          const double* xrow = xd + (b * C + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            sum_g += grow[i];
            sum_gx += grow[i] * (xrow[i] - m) * is;
          }
        }
        if (gg) gg[c] += sum_gx;
        if (gb) gb[c] += sum_g;
        if (gx) {
          const double inv_n = 1.0 / static_cast<double>(per_channel);
          for (int64_t b = 0; b < B; ++b) {
            double* gxr = gx + (b * C + c) * plane;
            const double* grow = g + (b * C + c) * plane;
            const double* xrow = xd + (b * C + c) * plane;
            if (training) {
              for (int64_t i = 0; i < plane; ++i) {
                double xh = (xrow[i] - m) * is;
                gxr[i] += gm[c] * is * (grow[i] - inv_n * sum_g - xh * inv_n * sum_gx);
              }
            } else {
              for (int64_t i = 0; i < plane; ++i) gxr[i] += gm[c] * is * grow[i];
            }
          }
        }
      }
    });
  }
  return out;
}

// ---- im2col / conv2d ---------------------------------------------------------

Tensor im2col(const Tensor& x, int k, int stride, int padding) {
  if (x.ndim() != 4)
    throw DimensionError("im2col: expected [B, C, H, W], got " + shape_str(x.shape()));
  if (stride < 1) throw ContractError("im2col: stride must be positive");
  if (padding < 0) throw ContractError("im2col: padding must be non-negative");
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H + 2 * padding < k || W + 2 * padding < k)
    throw DimensionError("im2col: kernel " + std::to_string(k) + " exceeds padded input " +
                         shape_str(x.shape()));
  const int64_t Ho = (H + 2 * padding - k) / stride + 1;
  const int64_t Wo = (W + 2 * padding - k) / stride + 1;
  const int64_t cols = C * k * k;
  Tensor out(Shape{B * Ho * Wo, cols}, 0.0);
  const double* xp = x.data();
  double* op = out.data();
  for (int64_t b = 0; b < B; ++b)
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox) {
        double* row = op + ((b * Ho + oy) * Wo + ox) * cols;
        const int64_t iy0 = oy * stride - padding;
        const int64_t ix0 = ox * stride - padding;
        for (int64_t c = 0; c < C; ++c) {
          const double* plane = xp + (b * C + c) * H * W;
          for (int64_t ky = 0; ky < k; ++ky) {
            const int64_t iy = iy0 + ky;
            double* dst = row + (c * k + ky) * k;
            if (iy < 0 || iy >= H) continue;  // zero padding already in place
            for (int64_t kx = 0; kx < k; ++kx) {
              const int64_t ix = ix0 + kx;
              if (ix >= 0 && ix < W) dst[kx] = plane[iy * W + ix];
            }
          }
        }
      }
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record("im2col", {&x}, out, [=]() {
      double* gx = ensure_grad(*xi).data();
      const double* g = oi->grad.data();
      for (int64_t b = 0; b < B; ++b)
        for (int64_t oy = 0; oy < Ho; ++oy)
          for (int64_t ox = 0; ox < Wo; ++ox) {
            const double* row = g + ((b * Ho + oy) * Wo + ox) * cols;
            const int64_t iy0 = oy * stride - padding;
            const int64_t ix0 = ox * stride - padding;
            for (int64_t c = 0; c < C; ++c) {
              double* plane = gx + (b * C + c) * H * W;
              for (int64_t ky = 0; ky < k; ++ky) {
                const int64_t iy = iy0 + ky;
                if (iy < 0 || iy >= H) continue;
                const double* src = row + (c * k + ky) * k;
                for (int64_t kx = 0; kx < k; ++kx) {
                  const int64_t ix = ix0 + kx;
                  if (ix >= 0 && ix < W) plane[iy * W + ix] += src[kx];
                }
              }
            }
          }
    });
  }
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  const bool single = x.ndim() == 3;
  if (!single && x.ndim() != 4)
    throw DimensionError("conv2d: expected [C, H, W] or [B, C, H, W], got " +
                         shape_str(x.shape()));
  if (w.ndim() != 4 || w.dim(2) != w.dim(3))
    throw DimensionError("conv2d: weight must be [Cout, Cin, k, k], got " + shape_str(w.shape()));
  Tensor x4 = single ? reshape(x, Shape{1, x.dim(0), x.dim(1), x.dim(2)}) : x;
  const int64_t B = x4.dim(0), Cin = x4.dim(1), H = x4.dim(2), W = x4.dim(3);
  if (w.dim(1) != Cin)
    throw DimensionError("conv2d: input channels " + shape_str(x.shape()) +
                         " do not match weight " + shape_str(w.shape()));
  const int64_t Cout = w.dim(0);
  const int k = static_cast<int>(w.dim(2));
  if (b.numel() != Cout)
    throw DimensionError("conv2d: bias extent " + shape_str(b.shape()) + " must equal Cout " +
                         std::to_string(Cout));
  const int64_t Ho = (H + 2 * padding - k) / stride + 1;
  const int64_t Wo = (W + 2 * padding - k) / stride + 1;

  Tensor cols = im2col(x4, k, stride, padding);          // [B·Ho·Wo, Cin·k²]
  Tensor wmat = reshape(w, Shape{Cout, Cin * k * k});
  Tensor out = matmul_nt(cols, wmat);                    // [B·Ho·Wo, Cout]
  out = add(out, reshape(b, Shape{Cout}));
  out = reshape(out, Shape{B, Ho, Wo, Cout});
  out = permute(out, {0, 3, 1, 2});
  return single ? reshape(out, Shape{Cout, Ho, Wo}) : out;
}

// ---- bilinear upsample ---------------------------------------------------------

Tensor bilinear_upsample(const Tensor& x, int64_t out_h, int64_t out_w) {
  if (x.ndim() != 4)
    throw DimensionError("bilinear_upsample: expected [B, C, h, w], got " + shape_str(x.shape()));
  const int64_t B = x.dim(0), C = x.dim(1), h = x.dim(2), w = x.dim(3);
  struct Lerp {
    int64_t lo, hi;
    double t;
  };
  auto build = [](int64_t in, int64_t out) {
    std::vector<Lerp> m(static_cast<size_t>(out));
    const double s = static_cast<double>(in) / static_cast<double>(out);
    for (int64_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * s - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      int64_t lo = static_cast<int64_t>(src);
      m[static_cast<size_t>(o)] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return m;
  };
  const auto ym = build(h, out_h);
  const auto xm = build(w, out_w);
  Tensor out(Shape{B, C, out_h, out_w}, 0.0);
  const double* xp = x.data();
  double* op = out.data();
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const double* plane = xp + bc * h * w;
    double* dst = op + bc * out_h * out_w;
    for (int64_t Y = 0; Y < out_h; ++Y) {
      const Lerp& ly = ym[static_cast<size_t>(Y)];
      for (int64_t X = 0; X < out_w; ++X) {
        const Lerp& lx = xm[static_cast<size_t>(X)];
        double v00 = plane[ly.lo * w + lx.lo], v01 = plane[ly.lo * w + lx.hi];
        double v10 = plane[ly.hi * w + lx.lo], v11 = plane[ly.hi * w + lx.hi];
        double top = v00 + (v01 - v00) * lx.t;
        double bot = v10 + (v11 - v10) * lx.t;
        dst[Y * out_w + X] = top + (bot - top) * ly.t;
      }
    }
  }
  if (detail::should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    detail::record("bilinear_upsample", {&x}, out, [=]() {
      double* gx = ensure_grad(*xi).data();
      const double* g = oi->grad.data();
      for (int64_t bc = 0; bc < B * C; ++bc) {
        double* plane = gx + bc * h * w;
        const double* src = g + bc * out_h * out_w;
        for (int64_t Y = 0; Y < out_h; ++Y) {
          const Lerp& ly = ym[static_cast<size_t>(Y)];
          for (int64_t X = 0; X < out_w; ++X) {
            const Lerp& lx = xm[static_cast<size_t>(X)];
            const double gv = src[Y * out_w + X];
            plane[ly.lo * w + lx.lo] += gv * (1.0 - ly.t) * (1.0 - lx.t);
            plane[ly.lo * w + lx.hi] += gv * (1.0 - ly.t) * lx.t;
            plane[ly.hi * w + lx.lo] += gv * ly.t * (1.0 - lx.t);
            plane[ly.hi * w + lx.hi] += gv * ly.t * lx.t;
          }
        }
      }
    });
  }
  return out;
}

// ---- cross entropy -------------------------------------------------------------

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  int64_t K, positions;
  if (logits.ndim() == 2) {
    K = logits.dim(1);
    positions = logits.dim(0);
  } else if (logits.ndim() == 4) {
    K = logits.dim(1);
    positions = logits.dim(0) * logits.dim(2) * logits.dim(3);
  } else {
    throw DimensionError("cross_entropy: logits must be [B, K] or [B, K, H, W], got " +
                         shape_str(logits.shape()));
  }
  if (static_cast<int64_t>(labels.size()) != positions)
    throw ContractError("cross_entropy: label count " + std::to_string(labels.size()) +
                        " does not match positions " + std::to_string(positions));

  // base offset of position p and stride between classes for that position
  const int64_t plane = logits.ndim() == 4 ? logits.dim(2) * logits.dim(3) : 0;
  auto locate = [&](int64_t p) -> std::pair<int64_t, int64_t> {
    if (plane == 0) return {p * K, 1};
    const int64_t b = p / plane, r = p % plane;
    return {b * K * plane + r, plane};
  };

  const double* lp = logits.data();
  const double inv_count = 1.0 / static_cast<double>(positions);
  auto probs = std::make_shared<std::vector<double>>(logits.vec().size());
  double loss = 0.0;
  for (int64_t p = 0; p < positions; ++p) {
    const int y = labels[static_cast<size_t>(p)];
    if (y < 0 || y >= K)
      throw ContractError("cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                          std::to_string(K) + ") at position " + std::to_string(p));
    auto [base, st] = locate(p);
    double mx = lp[base];
    for (int64_t c = 1; c < K; ++c) mx = std::max(mx, lp[base + c * st]);
    double z = 0.0;
    for (int64_t c = 0; c < K; ++c) z += std::exp(lp[base + c * st] - mx);
    const double lse = mx + std::log(z);
    loss += lse - lp[base + y * st];
    const double inv_z = 1.0 / z;
    for (int64_t c = 0; c < K; ++c)
      (*probs)[static_cast<size_t>(base + c * st)] = std::exp(lp[base + c * st] - mx) * inv_z;
  }
  Tensor out = Tensor::scalar(loss * inv_count);
  if (detail::should_record({&logits})) {
    auto li = logits.impl(), oi = out.impl();
    auto labs = labels;
    detail::record("cross_entropy", {&logits}, out, [=]() {
      double* gl = ensure_grad(*li).data();
      const double g = oi->grad[0] * inv_count;
      for (int64_t p = 0; p < positions; ++p) {
        auto [base, st] = locate(p);
        const int y = labs[static_cast<size_t>(p)];
        for (int64_t c = 0; c < K; ++c) {
          double delta = (*probs)[static_cast<size_t>(base + c * st)] - (c == y ? 1.0 : 0.0);
          gl[base + c * st] += g * delta;
        }
      }
    });
  }
  return out;
}

}  // namespace hook

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace hook {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
Shape row_major_strides(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until backward touches it
  std::string name;          // set for parameters; used in diagnostics
};

// Value-semantics handle onto a shared dense row-major buffer of doubles.
// Copying a Tensor aliases the same storage; deep copies via clone().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(const Shape& shape) { return Tensor(shape, 0.0); }
  static Tensor full(const Shape& shape, double v) { return Tensor(shape, v); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int64_t numel() const;
  int64_t dim(int axis) const;  // negative axis counts from the back

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& vec() { return impl_->data; }
  const std::vector<double>& vec() const { return impl_->data; }

  // Element access by multi-index; row-major. For tests and small code paths.
  double& at(std::initializer_list<int64_t> idx);
  double at(std::initializer_list<int64_t> idx) const;

  double item() const;  // requires numel() == 1

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Allocates a zero gradient buffer if absent, then returns it.
  std::vector<double>& grad();
  const std::vector<double>& grad_ref() const { return impl_->grad; }
  void zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }
  void drop_grad() { impl_->grad.clear(); }

  const std::string& name() const { return impl_->name; }
  Tensor& set_name(std::string n) {
    impl_->name = std::move(n);
    return *this;
  }

  Tensor clone() const;   // deep copy of data; grad not copied
  Tensor detach() const;  // shares data, fresh node identity, no grad

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

bool all_finite(const Tensor& t);

// Text dump format: one header line `shape: d0 d1 ...` followed by
// whitespace-separated decimal values in row-major order. Doubles are
// printed with enough digits to round-trip exactly.
void dump_tensor(std::ostream& os, const Tensor& t);
Tensor parse_tensor(std::istream& is);

}  // namespace hook

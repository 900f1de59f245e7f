#include "hook/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "hook/errors.hpp"

namespace hook {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    strides[i] = strides[i + 1] * shape[i + 1];
  return strides;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (int64_t d : shape)
    if (d <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<size_t>(shape_numel(impl_->shape)), fill);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (int64_t d : shape)
    if (d <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

int64_t Tensor::numel() const { return static_cast<int64_t>(impl_->data.size()); }

int64_t Tensor::dim(int axis) const {
  int n = ndim();
  if (axis < 0) axis += n;
  if (axis < 0 || axis >= n)
    throw DimensionError("axis out of range for shape " + shape_str(impl_->shape));
  return impl_->shape[axis];
}

double& Tensor::at(std::initializer_list<int64_t> idx) {
  if (static_cast<int>(idx.size()) != ndim())
    throw DimensionError("index rank mismatch for shape " + shape_str(impl_->shape));
  Shape strides = row_major_strides(impl_->shape);
  int64_t off = 0;
  int i = 0;
  for (int64_t v : idx) off += v * strides[i++];
  return impl_->data[static_cast<size_t>(off)];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  return const_cast<Tensor*>(this)->at(idx);
}

double Tensor::item() const {
  if (numel() != 1)
    throw ContractError("item() requires a scalar tensor, got shape " + shape_str(impl_->shape));
  return impl_->data[0];
}

std::vector<double>& Tensor::grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

Tensor Tensor::clone() const {
  Tensor out;
  out.impl_ = std::make_shared<TensorImpl>();
  out.impl_->shape = impl_->shape;
  out.impl_->data = impl_->data;
  out.impl_->requires_grad = impl_->requires_grad;
  out.impl_->name = impl_->name;
  return out;
}

Tensor Tensor::detach() const {
  Tensor out;
  out.impl_ = std::make_shared<TensorImpl>();
  out.impl_->shape = impl_->shape;
  out.impl_->data = impl_->data;  // copies values; detached from the graph
  out.impl_->requires_grad = false;
  return out;
}

bool all_finite(const Tensor& t) {
  for (double v : t.vec())
    if (!std::isfinite(v)) return false;
  return true;
}

void dump_tensor(std::ostream& os, const Tensor& t) {
  os << "shape:";
  for (int64_t d : t.shape()) os << ' ' << d;
  os << '\n';
  char buf[40];
  const auto& v = t.vec();
  for (size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    os << buf << ((i + 1) % 8 == 0 || i + 1 == v.size() ? '\n' : ' ');
  }
}

Tensor parse_tensor(std::istream& is) {
  std::string tag;
  is >> tag;
  if (tag != "shape:") throw ParseError("tensor dump: expected 'shape:' header, got '" + tag + "'");
  std::string line;
  std::getline(is, line);
  std::istringstream hdr(line);
  Shape shape;
  int64_t d;
  while (hdr >> d) shape.push_back(d);
  if (shape.empty()) throw ParseError("tensor dump: empty shape header");
  int64_t n = shape_numel(shape);
  std::vector<double> data;
  data.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double v;
    if (!(is >> v)) throw ParseError("tensor dump: expected " + std::to_string(n) + " values, got " + std::to_string(i));
    data.push_back(v);
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace hook

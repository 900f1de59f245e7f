#include "hook/autodiff.hpp"

#include "hook/errors.hpp"

namespace hook {

namespace {
thread_local Tape* g_tape = nullptr;
thread_local bool g_suspended = false;
}  // namespace

Tape* active_tape() { return g_suspended ? nullptr : g_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_tape) { g_tape = &tape; }
TapeScope::~TapeScope() { g_tape = prev_; }

NoGradScope::NoGradScope() : prev_(g_suspended) { g_suspended = true; }
NoGradScope::~NoGradScope() { g_suspended = prev_; }

void Tape::backward(const Tensor& root) {
  if (root.numel() != 1)
    throw ContractError("backward root must be scalar, got shape " + shape_str(root.shape()));
  auto impl = root.impl();
  if (impl->grad.empty()) impl->grad.assign(1, 0.0);
  impl->grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->output->grad.empty()) it->backward();
    // Intermediate grads are consumed exactly once per pass; dropping them
    // here keeps repeated backward calls accumulating one d(root)/d(leaf)
    // each and releases activation-sized buffers early.
    it->output->grad.clear();
    it->output->grad.shrink_to_fit();
  }
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

void record(const char* op, std::initializer_list<const Tensor*> inputs, Tensor& output,
            std::function<void()> backward) {
  TapeEntry e;
  e.op = op;
  for (const Tensor* t : inputs)
    if (t->defined()) e.inputs.push_back(t->impl());
  e.output = output.impl();
  e.backward = std::move(backward);
  output.set_requires_grad(true);
  active_tape()->append(std::move(e));
}

}  // namespace detail

}  // namespace hook

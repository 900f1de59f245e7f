#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "hook/tensor.hpp"

namespace hook {

// One recorded primitive application. `backward` reads output->grad and
// accumulates into the inputs' grads.
struct TapeEntry {
  const char* op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::shared_ptr<TensorImpl> output;
  std::function<void()> backward;
};

// Ordered record of primitive applications for one forward pass.
// Topological order holds by construction: an op is appended only after
// its inputs exist, and backward() replays entries in exact reverse order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  // Seeds d(root)/d(root) = 1 and replays the tape backwards. Gradients
  // accumulate into existing buffers; call zero_grads between steps.
  void backward(const Tensor& root);

  void append(TapeEntry e) { entries_.push_back(std::move(e)); }

 private:
  std::vector<TapeEntry> entries_;
};

// Thread-local active tape. Ops record onto it when set and not suspended.
Tape* active_tape();

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// Suspends recording (inference / metric evaluation inside a training scope).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  bool prev_;
};

void zero_grads(std::span<Tensor> params);

namespace detail {

// True when a tape is active, recording is not suspended, and at least one
// input participates in the graph.
bool should_record(std::initializer_list<const Tensor*> inputs);

// Marks the output as graph-participating and appends the entry.
void record(const char* op, std::initializer_list<const Tensor*> inputs, Tensor& output,
            std::function<void()> backward);

}  // namespace detail

}  // namespace hook

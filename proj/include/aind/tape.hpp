#pragma once

#include <functional>
#include <initializer_list>
#include <vector>

#include "aind/tensor.hpp"

namespace aind {

// Linear record of executed ops. backward() replays the recorded closures in
// reverse order. A tape is single-use: reset() before recording a new graph.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  explicit Tape(bool recording) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  // True when an op over these inputs has to be recorded.
  bool wants(std::initializer_list<const Var<T>*> inputs) const {
    if (!recording_) return false;
    for (const Var<T>* v : inputs) {
      if (v != nullptr && *v && (*v)->requires_grad()) return true;
    }
    return false;
  }

  void record(BackwardFn fn) {
    if (consumed_) throw StateError("tape already consumed by backward; call reset()");
    ops_.push_back(std::move(fn));
  }

  void backward(const Var<T>& loss) {
    if (consumed_) throw StateError("backward called twice without reset");
    if (ops_.empty()) throw StateError("backward on empty tape");
    if (!loss || loss->size() != 1) {
      throw ShapeError("backward requires a scalar loss, got " +
                       (loss ? loss->shape().str() : std::string("null")));
    }
    loss->ensure_grad();
    loss->grad()[0] = T{1};
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    consumed_ = true;
  }

  void reset() {
    ops_.clear();
    consumed_ = false;
  }

  std::size_t size() const { return ops_.size(); }
  bool consumed() const { return consumed_; }

 private:
  std::vector<BackwardFn> ops_;
  bool recording_ = true;
  bool consumed_ = false;
};

}  // namespace aind

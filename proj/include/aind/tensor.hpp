#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aind/errors.hpp"

namespace aind {

// Four-dimensional extent. Feature maps are (batch, height, width, channels);
// convolution kernels reuse the same struct as (kh, kw, in, out).
struct Shape {
  int n = 0;
  int h = 0;
  int w = 0;
  int c = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w) * static_cast<std::size_t>(c);
  }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
           std::to_string(c) + ")";
  }
};

inline Shape scalar_shape() { return {1, 1, 1, 1}; }

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(shape), data_(shape.numel(), fill) {
    check_shape();
  }
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_.numel()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  std::size_t index(int n, int y, int x, int c) const {
    return ((static_cast<std::size_t>(n) * shape_.h + y) * shape_.w + x) * shape_.c + c;
  }
  T& at(int n, int y, int x, int c) { return data_[index(n, y, x, c)]; }
  const T& at(int n, int y, int x, int c) const { return data_[index(n, y, x, c)]; }

  T item() const {
    if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_.str());
    return data_[0];
  }

  // Gradient buffer: absent until backward reaches this tensor.
  bool has_grad() const { return !grad_.empty(); }
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }
  void ensure_grad() {
    if (grad_.empty()) grad_.assign(data_.size(), T{0});
  }
  void clear_grad() {
    grad_.clear();
    grad_.shrink_to_fit();
  }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  // Value copy without gradient state.
  Tensor detached() const { return Tensor(shape_, data_); }

 private:
  void check_shape() const {
    if (shape_.n < 0 || shape_.h < 0 || shape_.w < 0 || shape_.c < 0) {
      throw ShapeError("negative tensor dimension " + shape_.str());
    }
  }

  Shape shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
  bool requires_grad_ = false;
};

// Graph handle. Ops consume and produce shared tensors so backward closures
// can reach their inputs.
template <typename T>
using Var = std::shared_ptr<Tensor<T>>;

template <typename T>
Var<T> make_var(Tensor<T> t, bool requires_grad = false) {
  auto v = std::make_shared<Tensor<T>>(std::move(t));
  v->set_requires_grad(requires_grad);
  return v;
}

template <typename T>
Var<T> constant(Shape shape, T value) {
  return make_var(Tensor<T>(shape, value));
}

}  // namespace aind

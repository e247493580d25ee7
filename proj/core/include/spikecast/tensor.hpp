#pragma once

// Dense row-major tensor with a reverse-mode gradient tape.
//
// A tensor is a shared handle: copying it aliases the same storage and
// history. Operations (ops.hpp) record an OpNode on their output whenever
// gradient recording is enabled and at least one input requires a gradient.
// The recorded graph is a DAG ordered by construction; backward() walks it
// once in reverse topological order.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spikecast {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct OpNode {
  std::string kind;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  // Receives the gradient of the op output and accumulates into inputs.
  std::function<void(const std::vector<T>& grad_out)> backward;
  // Set for ops whose backward is not the derivative of their forward
  // (surrogate spike functions). Finite-difference checks refuse these.
  bool custom_gradient = false;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a backward pass reaches this tensor
  bool requires_grad = false;
  std::shared_ptr<OpNode<T>> creator;

  std::vector<T>& grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }

  TensorImpl() = default;
  TensorImpl(const TensorImpl&) = delete;
  TensorImpl& operator=(const TensorImpl&) = delete;

  // Releases the history iteratively; the default recursive teardown
  // overflows the stack on long recurrent chains.
  ~TensorImpl() {
    if (!creator) return;
    std::vector<std::shared_ptr<OpNode<T>>> pending;
    pending.push_back(std::move(creator));
    while (!pending.empty()) {
      auto node = std::move(pending.back());
      pending.pop_back();
      if (node.use_count() != 1) continue;
      node->backward = nullptr;
      for (auto& in : node->inputs) {
        if (in.use_count() == 1 && in->creator) pending.push_back(std::move(in->creator));
      }
      node->inputs.clear();
    }
  }
};

}  // namespace detail

template <typename T>
class BasicTensor {
 public:
  using value_type = T;
  using Impl = detail::TensorImpl<T>;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, bool requires_grad = false);
  BasicTensor(Shape shape, std::vector<T> values, bool requires_grad = false);
  BasicTensor(Shape shape, std::initializer_list<T> values, bool requires_grad = false)
      : BasicTensor(std::move(shape), std::vector<T>(values), requires_grad) {}

  static BasicTensor scalar(T value, bool requires_grad = false) {
    return BasicTensor(Shape{}, std::vector<T>{value}, requires_grad);
  }
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  // Writable view. Only meaningful on leaves (parameters, inputs); writing
  // into a recorded intermediate invalidates its history.
  std::span<T> mutable_data() { return impl_->data; }
  T operator[](std::size_t flat) const { return impl_->data[flat]; }
  T item() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }
  bool is_leaf() const { return impl_->creator == nullptr; }
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  std::span<const T> grad() const;
  void zero_grad();

  // Reverse-mode pass from a single-element tensor. Gradients accumulate
  // into leaves; intermediate buffers are reset at the start of each pass.
  void backward() const;

  // Same values, no history, requires_grad = false.
  BasicTensor detach() const;

  const std::shared_ptr<Impl>& impl() const { return impl_; }
  static BasicTensor from_impl(std::shared_ptr<Impl> impl) {
    BasicTensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_recording_enabled();

/// Every node reachable from `root` through recorded history, inputs
/// before outputs.
template <typename T>
std::vector<detail::TensorImpl<T>*> topological_order(const BasicTensor<T>& root);

}  // namespace spikecast

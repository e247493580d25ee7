#pragma once

// Internal helpers shared by every translation unit that defines a
// differentiable op.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "spikecast/errors.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast::detail {

template <typename T>
using BackwardFn = std::function<void(const std::vector<T>&)>;

template <typename T>
bool should_record(std::initializer_list<const BasicTensor<T>*> inputs) {
  if (!grad_recording_enabled()) return false;
  for (const auto* in : inputs) {
    if (in->requires_grad()) return true;
  }
  return false;
}

template <typename T>
bool should_record(const std::vector<BasicTensor<T>>& inputs) {
  if (!grad_recording_enabled()) return false;
  for (const auto& in : inputs) {
    if (in.requires_grad()) return true;
  }
  return false;
}

template <typename T>
BasicTensor<T> constant_result(Shape shape, std::vector<T> data) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return BasicTensor<T>::from_impl(std::move(impl));
}

template <typename T>
BasicTensor<T> recorded_result(Shape shape, std::vector<T> data, const char* kind,
                               const std::vector<BasicTensor<T>>& inputs,
                               BackwardFn<T> backward, bool custom_gradient = false) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = true;
  auto node = std::make_shared<OpNode<T>>();
  node->kind = kind;
  for (const auto& in : inputs) node->inputs.push_back(in.impl());
  node->backward = std::move(backward);
  node->custom_gradient = custom_gradient;
  impl->creator = std::move(node);
  return BasicTensor<T>::from_impl(std::move(impl));
}

// Gradient buffer of an input, or nullptr when it does not take gradients.
template <typename T>
T* grad_target(const std::shared_ptr<TensorImpl<T>>& impl) {
  return impl->requires_grad ? impl->grad_buffer().data() : nullptr;
}

inline void require(bool ok, const std::string& op, const Shape& a, const Shape& b) {
  if (!ok) throw DimensionError(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

}  // namespace spikecast::detail

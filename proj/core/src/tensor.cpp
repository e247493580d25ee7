#include "spikecast/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "spikecast/errors.hpp"

namespace spikecast {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_recording_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  impl_->data.assign(shape_numel(shape), T(0));
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  BasicTensor t(std::move(shape), requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  }
  return impl_->data[0];
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  if (!has_grad()) throw ContractError("grad: no gradient recorded for this tensor");
  return impl_->grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  if (impl_) impl_->grad.clear();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(impl_->shape, impl_->data, false);
}

template <typename T>
std::vector<detail::TensorImpl<T>*> topological_order(const BasicTensor<T>& root) {
  using Impl = detail::TensorImpl<T>;
  std::vector<Impl*> order;
  if (!root.defined()) return order;
  std::unordered_set<Impl*> visited;
  // Iterative post-order DFS; recurrent graphs are thousands of nodes deep.
  std::vector<std::pair<Impl*, std::size_t>> stack;
  stack.emplace_back(root.impl().get(), 0);
  visited.insert(root.impl().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto* creator = node->creator.get();
    if (creator && next < creator->inputs.size()) {
      Impl* child = creator->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }
  return order;
}

template <typename T>
void BasicTensor<T>::backward() const {
  if (!defined() || numel() != 1) {
    throw ContractError("backward: loss must be a single-element tensor, got shape " +
                        (defined() ? shape_str(shape()) : std::string("<undefined>")));
  }
  if (!impl_->requires_grad) {
    throw ContractError("backward: loss does not depend on any tensor requiring grad");
  }
  auto order = topological_order(*this);
  for (auto* node : order) {
    if (node->creator) node->grad.assign(node->data.size(), T(0));
  }
  impl_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = *it;
    if (node->creator && node->creator->backward) node->creator->backward(node->grad);
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template std::vector<detail::TensorImpl<float>*> topological_order(const BasicTensor<float>&);
template std::vector<detail::TensorImpl<double>*> topological_order(const BasicTensor<double>&);

}  // namespace spikecast

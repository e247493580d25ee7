#pragma once

// Differentiable tensor operations. Shapes must match exactly; the only
// implicit expansion is add_bias (a vector added along the last axis).
// Violations throw DimensionError naming the op and both shapes.

#include <cstdint>
#include <vector>

#include "spikecast/tensor.hpp"

namespace spikecast {

// Linear algebra. matmul treats `a` as rows of its last axis:
// (..., k) x (k, n) -> (..., n).
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

// Batched product (B, m, k) x (B, k, n) -> (B, m, n). With transpose_b the
// right operand is (B, n, k) and is used transposed.
template <typename T>
BasicTensor<T> bmm(const BasicTensor<T>& a, const BasicTensor<T>& b, bool transpose_b = false);

template <typename T>
BasicTensor<T> swap_axes(const BasicTensor<T>& x, std::size_t axis0, std::size_t axis1);

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& x) {
  return swap_axes(x, 0, 1);
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

// Elementwise.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, T value);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor);
// x (..., n) + bias (n)
template <typename T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> log(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> exp(const BasicTensor<T>& x);
// Gradient passes through where lo <= x <= hi and is zero elsewhere.
template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& x, T lo, T hi);

// Structure.
template <typename T>
BasicTensor<T> concat_last(const std::vector<BasicTensor<T>>& parts);
template <typename T>
BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>& parts);
template <typename T>
BasicTensor<T> slice_last(const BasicTensor<T>& x, std::size_t begin, std::size_t end);
template <typename T>
BasicTensor<T> slice_rows(const BasicTensor<T>& x, std::size_t begin, std::size_t end);

// Row-wise softmax over the last axis (max-shifted).
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x);

// Reductions to a scalar.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);

// Row selection along axis 0: out[r] = x[index[r]].
template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, const std::vector<std::uint32_t>& index);

// Sparse row sum along axis 0 in CSR form:
// out[r] = sum over p in [offsets[r], offsets[r+1]) of x[indices[p]].
template <typename T>
BasicTensor<T> index_sum_rows(const BasicTensor<T>& x, const std::vector<std::uint32_t>& offsets,
                              const std::vector<std::uint32_t>& indices);

// Entries with mask != 0 are replaced by `value` and receive no gradient.
template <typename T>
BasicTensor<T> masked_fill(const BasicTensor<T>& x, const std::vector<std::uint8_t>& mask, T value);

// (G, ...) -> (G, copies, ...), each leading slice repeated `copies` times.
template <typename T>
BasicTensor<T> repeat_frames(const BasicTensor<T>& x, std::size_t copies);

// Mean over consecutive groups of `group` rows along axis 0.
template <typename T>
BasicTensor<T> mean_groups(const BasicTensor<T>& x, std::size_t group);

template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& prediction, const BasicTensor<T>& target) {
  auto diff = sub(prediction, target);
  return mean(mul(diff, diff));
}

}  // namespace spikecast

#pragma once

// Observation block: residual single-head attention restricted to each
// node's local neighbourhood, applied independently at every series step.
//
//   q_i = x_i Wq,  k_j = x_j Wk,  v_j = x_j Wv
//   alpha_ij = softmax_{j in S_i} (q_i . k_j / sqrt(f) + bias_ij)
//   x_i' = x_i + sum_j alpha_ij v_j
//
// bias_ij is log(a_ij) when an adjacency is supplied (so the learned graph
// weights the attention and receives gradient), zero otherwise. Nodes with
// an empty neighbourhood pass through unchanged.

#include "spikecast/graph.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast {

template <typename T>
struct ObsWeights {
  BasicTensor<T> wq;  // (f, f)
  BasicTensor<T> wk;
  BasicTensor<T> wv;
};

/// Attention coefficients, shape (rows, K) with rows = numel(x) / f and
/// K = max |S_i|. Padded slots hold exactly 0.
template <typename T>
BasicTensor<T> obs_attention(const BasicTensor<T>& x, const NeighborSets& neighborhoods,
                             const ObsWeights<T>& weights,
                             const BasicTensor<T>& adjacency = BasicTensor<T>());

/// x: (..., N, f). Returns the same shape.
template <typename T>
BasicTensor<T> obs_forward(const BasicTensor<T>& x, const NeighborSets& neighborhoods,
                           const ObsWeights<T>& weights,
                           const BasicTensor<T>& adjacency = BasicTensor<T>());

}  // namespace spikecast

#pragma once

// Adaptive adjacency A = sigmoid(E E^T) + lambda * I over learnable node
// embeddings, plus the non-differentiable structure derived from it:
// threshold-pruned candidate sets, row-sum importance, and the two-level
// (local, then importance-ranked 2-hop) neighbour samples.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spikecast/tensor.hpp"

namespace spikecast {

using NeighborSets = std::vector<std::vector<std::uint32_t>>;

/// Symmetric Gram matrix E E^T; mirrored so the result is exactly symmetric.
template <typename T>
BasicTensor<T> gram(const BasicTensor<T>& e);

/// sigmoid(E E^T) + lambda * I. Differentiable w.r.t. E.
template <typename T>
BasicTensor<T> build_adjacency(const BasicTensor<T>& embeddings, T lambda);

/// C_i = { j != i : a_ij > T_i },  T_i = (sum_{j != i} a_ij) / a_ii.
/// Throws ContractError on a zero self-loop weight.
template <typename T>
NeighborSets prune_neighbors(const BasicTensor<T>& a);

/// Row sums of A, self-loop included.
template <typename T>
std::vector<double> node_importance(const BasicTensor<T>& a);

struct TwoLevelSamples {
  NeighborSets local;        // S_i^(1)
  NeighborSets semi_global;  // S_i^(2)
};

/// S^(1): top-k1 of C_i by a_ij. S^(2): top-k2 by importance over the 2-hop
/// pool { k in C_j : j in S^(1) } minus S^(1) and i. Ties go to the lower
/// index; the result is a pure function of its inputs.
template <typename T>
TwoLevelSamples sample_two_level(const BasicTensor<T>& a, const NeighborSets& candidates,
                                 const std::vector<double>& importance, std::size_t k1,
                                 std::size_t k2);

struct AdaptiveGraph {
  Tensor a;
  float lambda = 0.0f;
  NeighborSets candidates;
  std::vector<double> importance;
  TwoLevelSamples samples;
};

/// Convenience: adjacency plus every derived structure.
AdaptiveGraph build_graph(const Tensor& embeddings, float lambda, std::size_t k1, std::size_t k2);

/// Dense 0/1 matrix with ones at (i, j) for j in sets[i].
std::vector<float> neighbor_mask(const NeighborSets& sets, std::size_t n);

}  // namespace spikecast

#pragma once

// Multi-scale spiking aggregation.
//
// Spike frames carry binary node features, so the neighbourhood product
// A X reduces to gathering the rows of active neighbours and summing them
// (index-mask aggregation). Each hop computes
//   m_i = (sum_{j in S_i} x_j) W
// and fires m through an LIF layer whose state runs across the whole spike
// sequence. Hop 2 repeats the routine on hop-1 spikes over the semi-global
// sample sets. No N x N product is formed on this path.

#include <cstdint>
#include <vector>

#include "spikecast/graph.hpp"
#include "spikecast/spiking.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast {

template <typename T>
struct HopWeights {
  BasicTensor<T> w1;  // (f, d1)
  BasicTensor<T> w2;  // (d1, d2)
};

/// Single-node aggregation: (sum_{j in sample_set} x_bin[j]) w, shape (D).
/// Accumulates in double.
Tensor index_mask_aggregate(const Tensor& x_bin, const std::vector<std::uint32_t>& sample_set,
                            const Tensor& w);

/// Reference form (M x_bin) w with a dense 0/1 mask M (N, N), accumulated
/// in double. Test oracle; not used by the forward path.
Tensor dense_oracle_aggregate(const Tensor& x_bin, const Tensor& mask, const Tensor& w);

/// Batched, differentiable aggregation over spike frames:
/// x (..., N, F) -> (..., N, D).
template <typename T>
BasicTensor<T> aggregate_hop(const BasicTensor<T>& x, const NeighborSets& sets,
                             const BasicTensor<T>& w);

template <typename T>
struct MssaOutput {
  BasicTensor<T> hop1_potential;  // (B, P, N, d1), pre-LIF
  BasicTensor<T> hop1;            // spikes
  BasicTensor<T> hop2_potential;  // (B, P, N, d2)
  BasicTensor<T> hop2;
};

/// Spike input (B, P, N, f) -> hop spike trains over the same P steps.
template <typename T>
MssaOutput<T> mssa_forward_spikes(const BasicTensor<T>& spikes, const TwoLevelSamples& samples,
                                  const HopWeights<T>& weights, const LifParams& lif);

/// Continuous OBS output (B, T, N, f): spike-encoded into T*ts frames, then
/// aggregated. The returned hop2 train is the module output.
template <typename T>
MssaOutput<T> mssa_forward(const BasicTensor<T>& x_obs, const TwoLevelSamples& samples,
                           const HopWeights<T>& weights, const LifParams& lif, std::size_t ts);

}  // namespace spikecast

#pragma once

// Dual-path spike fusion: a lightweight LSTM recovers continuous hidden
// states from the aggregated spike sequence, a spiking self-attention
// branch re-reads (re-encoded) spikes, and a learned sigmoid gate mixes
// the two.

#include <cstddef>

#include "spikecast/spiking.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast {

template <typename T>
struct LstmWeights {
  BasicTensor<T> wx;  // (in, 4h), gate blocks ordered input, forget, cell, output
  BasicTensor<T> wh;  // (h, 4h)
  BasicTensor<T> b;   // (4h)
};

template <typename T>
struct LstmOutput {
  BasicTensor<T> hidden;  // (B, T, N, h)
  BasicTensor<T> last;    // (B * N, h), rows ordered (b, n)
};

/// (B, T*ts, N, D) spike frames -> (B, T, N, ts*D): the ts sub-step frames of
/// each series step are concatenated into one input vector.
template <typename T>
BasicTensor<T> flatten_substeps(const BasicTensor<T>& spikes, std::size_t ts);

/// Per-node LSTM over axis 1 of x (B, T, N, in), zero initial state.
template <typename T>
LstmOutput<T> lstm_forward(const BasicTensor<T>& x, const LstmWeights<T>& weights);

template <typename T>
struct SsaWeights {
  BasicTensor<T> wq;  // (in, d_k)
  BasicTensor<T> wk;
  BasicTensor<T> wv;
};

template <typename T>
struct SsaOutput {
  BasicTensor<T> out;        // (B, N, Q, d_k) attention read-out (membrane values)
  BasicTensor<T> attention;  // (B * N, Q, P) row-stochastic
  BasicTensor<T> q;          // (B, P, N, d_k) binary
  BasicTensor<T> k;
  BasicTensor<T> v;
};

template <typename T>
struct SpikeAttention {
  BasicTensor<T> out;        // (B, N, Q, d_k)
  BasicTensor<T> attention;  // (B * N, Q, P)
};

/// Score path of the spiking self-attention: per node, softmax(Q K^T / sqrt(d_k)) V
/// over the P frames of q, k, v (B, P, N, d_k), queries from the last
/// `query_tail` frames (0 means all P).
template <typename T>
SpikeAttention<T> spike_attention(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v,
                                  std::size_t query_tail = 0);

/// Spiking self-attention over the P frames of each node's spike train
/// s (B, P, N, in). Q, K, V are LIF-fired projections; scores Q K^T / sqrt(d_k)
/// go through a row softmax and weight V. Only the last `query_tail` frames
/// are used as queries (0 means all P).
template <typename T>
SsaOutput<T> ssa_forward(const BasicTensor<T>& s, const SsaWeights<T>& weights, const LifParams& lif,
                         std::size_t query_tail = 0);

/// (B, N, Q, d) -> (B, N, Q/ts, d): mean read-out over each group of ts frames.
template <typename T>
BasicTensor<T> decode_substeps(const BasicTensor<T>& out, std::size_t ts);

template <typename T>
struct GateWeights {
  BasicTensor<T> w;  // (2h, h)
  BasicTensor<T> b;  // (h)
};

template <typename T>
struct GateOutput {
  BasicTensor<T> fused;
  BasicTensor<T> gate;
};

/// g * a + (1 - g) * b elementwise. The forward value is clamped to
/// [min(a, b), max(a, b)] and returns a exactly when a == b; the backward is
/// that of the unclamped expression.
template <typename T>
BasicTensor<T> gated_mix(const BasicTensor<T>& g, const BasicTensor<T>& a, const BasicTensor<T>& b);

/// G = sigmoid([h_lstm ; h_ssa] W + b);  fused = G * h_lstm + (1 - G) * h_ssa.
/// G is clamped to the smallest representable open interval around (0, 1).
template <typename T>
GateOutput<T> gate_fuse(const BasicTensor<T>& h_lstm, const BasicTensor<T>& h_ssa,
                        const GateWeights<T>& weights);

}  // namespace spikecast

#pragma once

// Leaky integrate-and-fire dynamics with an arctan surrogate gradient.
//
//   U[t] = I[t] + H[t-1]
//   S[t] = step(U[t] - u_th)           (step(0) = 1)
//   H[t] = beta * U[t] * (1 - S[t]) + u_reset * S[t]
//
// Backward replaces d step(x)/dx with
//   g(x) = alpha / (2 * (1 + (pi/2 * alpha * x)^2)),
// the derivative of the bounded arctan sigmoid. The reset factor (1 - S) is
// not detached, so gradient also flows through the reset path.

#include <cstddef>

#include "spikecast/tensor.hpp"

namespace spikecast {

struct LifParams {
  float beta = 0.5f;
  float u_th = 1.0f;
  float u_reset = 0.0f;
  float alpha = 2.0f;

  // Throws ContractError unless 0 < beta <= 1, u_th > u_reset, alpha > 0.
  void validate() const;
};

double surrogate_grad(double x, double alpha);

/// Heaviside forward, surrogate backward. Marked as a custom-gradient op.
template <typename T>
BasicTensor<T> heaviside(const BasicTensor<T>& x, T alpha);

template <typename T>
struct LifStepResult {
  BasicTensor<T> spike;
  BasicTensor<T> h;
};

/// One LIF update, composed from primitive differentiable ops.
template <typename T>
LifStepResult<T> lif_step(const LifParams& params, const BasicTensor<T>& h_prev,
                          const BasicTensor<T>& input_current);

/// Fused LIF over a sequence: input (G, S, ...) holds G independent
/// sequences of S steps; every neuron starts at u_reset. Returns binary
/// spikes of the same shape. Gradients match unrolled lif_step exactly.
template <typename T>
BasicTensor<T> lif_scan(const BasicTensor<T>& input, const LifParams& params);

/// Encodes one series step `h` (any shape) into `ts` LIF sub-steps driven by
/// the constant input h. Output shape (ts, h.shape...).
template <typename T>
BasicTensor<T> spike_encode(const BasicTensor<T>& h, std::size_t ts, const LifParams& params);

/// Batched form: h (B, T, ...) -> (B, T*ts, ...). Each series step is a
/// fresh neuron run, so one series step maps to exactly ts spike frames.
template <typename T>
BasicTensor<T> spike_encode_sequence(const BasicTensor<T>& h, std::size_t ts,
                                     const LifParams& params);

}  // namespace spikecast

#include "spikecast/dsf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "op_support.hpp"
#include "spikecast/ops.hpp"

namespace spikecast {

using detail::constant_result;
using detail::grad_target;
using detail::recorded_result;
using detail::should_record;

template <typename T>
BasicTensor<T> flatten_substeps(const BasicTensor<T>& spikes, std::size_t ts) {
  if (spikes.rank() != 4 || ts == 0 || spikes.dim(1) % ts != 0) {
    throw DimensionError("flatten_substeps: " + std::to_string(ts) + " sub-steps do not tile " +
                         shape_str(spikes.shape()));
  }
  const std::size_t b = spikes.dim(0), steps = spikes.dim(1) / ts, n = spikes.dim(2), d = spikes.dim(3);
  auto framed = reshape(spikes, Shape{b * steps, ts, n, d});
  return reshape(swap_axes(framed, 1, 2), Shape{b, steps, n, ts * d});
}

template <typename T>
LstmOutput<T> lstm_forward(const BasicTensor<T>& x, const LstmWeights<T>& w) {
  if (x.rank() != 4) throw DimensionError("lstm_forward: expected (B, T, N, in), got " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0), steps = x.dim(1), n = x.dim(2), in = x.dim(3);
  const std::size_t h = w.wh.dim(0);
  if (w.wx.shape() != Shape{in, 4 * h} || w.wh.shape() != Shape{h, 4 * h} || w.b.shape() != Shape{4 * h}) {
    throw DimensionError("lstm_forward: weights " + shape_str(w.wx.shape()) + "," +
                         shape_str(w.wh.shape()) + "," + shape_str(w.b.shape()) + " for input " +
                         shape_str(x.shape()));
  }
  if (steps == 0) throw ContractError("lstm_forward: empty sequence");
  const std::size_t rows = batch * n;
  // Input projection for every step at once; rows ordered (t, b, n).
  auto time_major = reshape(swap_axes(x, 0, 1), Shape{steps * rows, in});
  auto projected = add_bias(matmul(time_major, w.wx), w.b);

  BasicTensor<T> hidden(Shape{rows, h});
  BasicTensor<T> cell(Shape{rows, h});
  std::vector<BasicTensor<T>> outputs;
  outputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    auto gates = slice_rows(projected, t * rows, (t + 1) * rows);
    if (t > 0) gates = add(gates, matmul(hidden, w.wh));
    auto i = sigmoid(slice_last(gates, 0, h));
    auto f = sigmoid(slice_last(gates, h, 2 * h));
    auto g = tanh(slice_last(gates, 2 * h, 3 * h));
    auto o = sigmoid(slice_last(gates, 3 * h, 4 * h));
    cell = t > 0 ? add(mul(f, cell), mul(i, g)) : mul(i, g);
    hidden = mul(o, tanh(cell));
    outputs.push_back(hidden);
  }
  LstmOutput<T> out;
  out.last = hidden;
  out.hidden = swap_axes(reshape(concat_rows(outputs), Shape{steps, batch, n, h}), 0, 1);
  return out;
}

namespace {

// (B, P, N, d) -> (B * N, P, d)
template <typename T>
BasicTensor<T> node_major(const BasicTensor<T>& x) {
  const std::size_t b = x.dim(0), p = x.dim(1), n = x.dim(2), d = x.dim(3);
  return reshape(swap_axes(x, 1, 2), Shape{b * n, p, d});
}

}  // namespace

template <typename T>
SpikeAttention<T> spike_attention(const BasicTensor<T>& q, const BasicTensor<T>& k, const BasicTensor<T>& v,
                                  std::size_t query_tail) {
  if (q.rank() != 4 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("spike_attention: q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) +
                         ", v " + shape_str(v.shape()));
  }
  const std::size_t batch = q.dim(0), frames = q.dim(1), n = q.dim(2), dk = q.dim(3);
  if (query_tail == 0 || query_tail > frames) query_tail = frames;
  auto queries = q;
  if (query_tail < frames) {
    queries = swap_axes(slice_rows(swap_axes(q, 0, 1), frames - query_tail, frames), 0, 1);
  }
  auto scores = scale(bmm(node_major(queries), node_major(k), /*transpose_b=*/true),
                      T(1) / std::sqrt(static_cast<T>(dk)));
  SpikeAttention<T> out;
  out.attention = softmax(scores);
  out.out = reshape(bmm(out.attention, node_major(v)), Shape{batch, n, query_tail, dk});
  return out;
}

template <typename T>
SsaOutput<T> ssa_forward(const BasicTensor<T>& s, const SsaWeights<T>& w, const LifParams& lif,
                         std::size_t query_tail) {
  if (s.rank() != 4) throw DimensionError("ssa_forward: expected (B, P, N, in), got " + shape_str(s.shape()));
  const std::size_t dk = w.wq.rank() == 2 ? w.wq.dim(1) : 0;
  if (dk == 0) throw ContractError("ssa_forward: key width must be >= 1");

  SsaOutput<T> out;
  out.q = lif_scan(matmul(s, w.wq), lif);
  out.k = lif_scan(matmul(s, w.wk), lif);
  out.v = lif_scan(matmul(s, w.wv), lif);
  auto att = spike_attention(out.q, out.k, out.v, query_tail);
  out.out = att.out;
  out.attention = att.attention;
  return out;
}

template <typename T>
BasicTensor<T> decode_substeps(const BasicTensor<T>& out, std::size_t ts) {
  if (out.rank() != 4 || ts == 0 || out.dim(2) % ts != 0) {
    throw DimensionError("decode_substeps: " + std::to_string(ts) + " sub-steps do not tile " +
                         shape_str(out.shape()));
  }
  const std::size_t b = out.dim(0), n = out.dim(1), q = out.dim(2), d = out.dim(3);
  auto rows = mean_groups(reshape(out, Shape{b * n * q, d}), ts);
  return reshape(rows, Shape{b, n, q / ts, d});
}

template <typename T>
BasicTensor<T> gated_mix(const BasicTensor<T>& g, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (g.shape() != a.shape() || a.shape() != b.shape()) {
    throw DimensionError("gated_mix: shapes " + shape_str(g.shape()) + ", " + shape_str(a.shape()) +
                         ", " + shape_str(b.shape()));
  }
  const auto gv = g.data(), av = a.data(), bv = b.data();
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (av[i] == bv[i]) {
      out[i] = av[i];
      continue;
    }
    const T mixed = gv[i] * av[i] + (T(1) - gv[i]) * bv[i];
    out[i] = std::clamp(mixed, std::min(av[i], bv[i]), std::max(av[i], bv[i]));
  }
  if (!should_record({&g, &a, &b})) return constant_result(a.shape(), std::move(out));
  auto gi = g.impl(), ai = a.impl(), bi = b.impl();
  return recorded_result<T>(a.shape(), std::move(out), "gated_mix", {g, a, b},
                            [gi, ai, bi](const std::vector<T>& grad) {
                              T* gg = grad_target(gi);
                              T* ga = grad_target(ai);
                              T* gb = grad_target(bi);
                              for (std::size_t i = 0; i < grad.size(); ++i) {
                                const T gate = gi->data[i];
                                if (gg) gg[i] += grad[i] * (ai->data[i] - bi->data[i]);
                                if (ga) ga[i] += grad[i] * gate;
                                if (gb) gb[i] += grad[i] * (T(1) - gate);
                              }
                            });
}

template <typename T>
GateOutput<T> gate_fuse(const BasicTensor<T>& h_lstm, const BasicTensor<T>& h_ssa,
                        const GateWeights<T>& w) {
  if (h_lstm.shape() != h_ssa.shape()) {
    throw DimensionError("gate_fuse: branch shapes " + shape_str(h_lstm.shape()) + " and " +
                         shape_str(h_ssa.shape()));
  }
  GateOutput<T> out;
  // A rounded sigmoid can land on exactly 0 or 1; keep the gate open.
  out.gate = clamp(sigmoid(add_bias(matmul(concat_last<T>({h_lstm, h_ssa}), w.w), w.b)),
                   std::numeric_limits<T>::min(), std::nextafter(T(1), T(0)));
  out.fused = gated_mix(out.gate, h_lstm, h_ssa);
  return out;
}

#define SPIKECAST_INSTANTIATE_DSF(T)                                                              \
  template BasicTensor<T> flatten_substeps(const BasicTensor<T>&, std::size_t);                   \
  template LstmOutput<T> lstm_forward(const BasicTensor<T>&, const LstmWeights<T>&);              \
  template SpikeAttention<T> spike_attention(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                             const BasicTensor<T>&, std::size_t);                \
  template SsaOutput<T> ssa_forward(const BasicTensor<T>&, const SsaWeights<T>&, const LifParams&, \
                                    std::size_t);                                                 \
  template BasicTensor<T> decode_substeps(const BasicTensor<T>&, std::size_t);                    \
  template BasicTensor<T> gated_mix(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                    const BasicTensor<T>&);                                       \
  template GateOutput<T> gate_fuse(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                   const GateWeights<T>&);

SPIKECAST_INSTANTIATE_DSF(float)
SPIKECAST_INSTANTIATE_DSF(double)

}  // namespace spikecast

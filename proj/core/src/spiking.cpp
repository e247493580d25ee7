#include "spikecast/spiking.hpp"

#include <cmath>
#include <numbers>

#include "op_support.hpp"
#include "spikecast/ops.hpp"

namespace spikecast {

using detail::constant_result;
using detail::grad_target;
using detail::recorded_result;
using detail::should_record;

void LifParams::validate() const {
  if (!(beta > 0.0f && beta <= 1.0f)) throw ContractError("LifParams: beta must lie in (0, 1]");
  if (!(u_th > u_reset)) throw ContractError("LifParams: u_th must exceed u_reset");
  if (!(alpha > 0.0f)) throw ContractError("LifParams: alpha must be positive");
}

double surrogate_grad(double x, double alpha) {
  const double z = std::numbers::pi / 2.0 * alpha * x;
  return alpha / (2.0 * (1.0 + z * z));
}

template <typename T>
BasicTensor<T> heaviside(const BasicTensor<T>& x, T alpha) {
  std::vector<T> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] >= T(0) ? T(1) : T(0);
  if (!should_record({&x})) return constant_result(x.shape(), std::move(out));
  auto xi = x.impl();
  return recorded_result<T>(
      x.shape(), std::move(out), "heaviside", {x},
      [xi, alpha](const std::vector<T>& g) {
        if (T* gx = grad_target(xi))
          for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] += g[i] * static_cast<T>(surrogate_grad(xi->data[i], alpha));
      },
      /*custom_gradient=*/true);
}

template <typename T>
LifStepResult<T> lif_step(const LifParams& params, const BasicTensor<T>& h_prev,
                          const BasicTensor<T>& input_current) {
  if (h_prev.shape() != input_current.shape()) {
    throw DimensionError("lif_step: state " + shape_str(h_prev.shape()) + " vs input " +
                         shape_str(input_current.shape()));
  }
  const auto u = add(input_current, h_prev);
  const auto s = heaviside(add_scalar(u, static_cast<T>(-params.u_th)), static_cast<T>(params.alpha));
  const auto keep = add_scalar(scale(s, T(-1)), T(1));
  const auto h = add(scale(mul(u, keep), static_cast<T>(params.beta)),
                     scale(s, static_cast<T>(params.u_reset)));
  return {s, h};
}

template <typename T>
BasicTensor<T> lif_scan(const BasicTensor<T>& input, const LifParams& params) {
  if (input.rank() < 2) {
    throw DimensionError("lif_scan: need (G, S, ...) input, got " + shape_str(input.shape()));
  }
  const std::size_t groups = input.dim(0);
  const std::size_t steps = input.dim(1);
  const std::size_t width = (groups * steps) != 0 ? input.numel() / (groups * steps) : 0;
  const T beta = params.beta, th = params.u_th, reset = params.u_reset;
  const bool record = should_record({&input});

  std::vector<T> spikes(input.numel());
  std::vector<T> potentials;
  if (record) potentials.resize(input.numel());
  std::vector<T> h(width);
  const T* in = input.data().data();
  for (std::size_t g = 0; g < groups; ++g) {
    std::fill(h.begin(), h.end(), reset);
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t base = (g * steps + s) * width;
      for (std::size_t j = 0; j < width; ++j) {
        const T u = in[base + j] + h[j];
        const T spike = u - th >= T(0) ? T(1) : T(0);
        spikes[base + j] = spike;
        if (record) potentials[base + j] = u;
        h[j] = beta * u * (T(1) - spike) + reset * spike;
      }
    }
  }
  if (!record) return constant_result(input.shape(), std::move(spikes));

  auto xi = input.impl();
  auto saved_u = std::make_shared<std::vector<T>>(std::move(potentials));
  auto saved_s = std::make_shared<std::vector<T>>(spikes);
  const T alpha = params.alpha;
  return recorded_result<T>(
      input.shape(), std::move(spikes), "lif_scan", {input},
      [xi, saved_u, saved_s, groups, steps, width, beta, th, reset, alpha](const std::vector<T>& g) {
        T* gx = grad_target(xi);
        if (!gx) return;
        const auto& u = *saved_u;
        const auto& s = *saved_s;
        std::vector<T> gh(width);
        for (std::size_t grp = 0; grp < groups; ++grp) {
          std::fill(gh.begin(), gh.end(), T(0));
          for (std::size_t t = steps; t-- > 0;) {
            const std::size_t base = (grp * steps + t) * width;
            for (std::size_t j = 0; j < width; ++j) {
              const std::size_t k = base + j;
              const T gs = g[k] + gh[j] * (reset - beta * u[k]);
              const T gu = gs * static_cast<T>(surrogate_grad(u[k] - th, alpha)) +
                           gh[j] * beta * (T(1) - s[k]);
              gx[k] += gu;
              gh[j] = gu;
            }
          }
        }
      },
      /*custom_gradient=*/true);
}

template <typename T>
BasicTensor<T> spike_encode_sequence(const BasicTensor<T>& h, std::size_t ts,
                                     const LifParams& params) {
  if (ts < 1) throw ContractError("spike_encode: ts must be >= 1");
  if (h.rank() < 2) {
    throw DimensionError("spike_encode_sequence: need (B, T, ...) input, got " + shape_str(h.shape()));
  }
  const std::size_t batch = h.dim(0), len = h.dim(1);
  const std::size_t width = (batch * len) != 0 ? h.numel() / (batch * len) : 0;
  auto frames = reshape(h, Shape{batch * len, width});
  auto spikes = lif_scan(repeat_frames(frames, ts), params);
  Shape out_shape = h.shape();
  out_shape[1] = len * ts;
  return reshape(spikes, std::move(out_shape));
}

template <typename T>
BasicTensor<T> spike_encode(const BasicTensor<T>& h, std::size_t ts, const LifParams& params) {
  if (ts < 1) throw ContractError("spike_encode: ts must be >= 1");
  Shape seq_shape = h.shape();
  seq_shape.insert(seq_shape.begin(), {1, 1});
  Shape out_shape = h.shape();
  out_shape.insert(out_shape.begin(), ts);
  return reshape(spike_encode_sequence(reshape(h, seq_shape), ts, params), out_shape);
}

#define SPIKECAST_INSTANTIATE_SPIKING(T)                                                      \
  template BasicTensor<T> heaviside(const BasicTensor<T>&, T);                               \
  template LifStepResult<T> lif_step(const LifParams&, const BasicTensor<T>&,                \
                                     const BasicTensor<T>&);                                  \
  template BasicTensor<T> lif_scan(const BasicTensor<T>&, const LifParams&);                  \
  template BasicTensor<T> spike_encode(const BasicTensor<T>&, std::size_t, const LifParams&); \
  template BasicTensor<T> spike_encode_sequence(const BasicTensor<T>&, std::size_t, const LifParams&);

SPIKECAST_INSTANTIATE_SPIKING(float)
SPIKECAST_INSTANTIATE_SPIKING(double)

}  // namespace spikecast

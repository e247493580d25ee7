#include "spikecast/mssa.hpp"

#include <algorithm>

#include "spikecast/errors.hpp"
#include "spikecast/ops.hpp"
#include "spikecast/profile.hpp"

namespace spikecast {

namespace {

// pooled (F) times w (F, D), accumulated in double in a fixed order.
std::vector<float> project(const std::vector<double>& pooled, const Tensor& w) {
  const std::size_t f = w.dim(0), d = w.dim(1);
  const auto wv = w.data();
  std::vector<float> out(d);
  for (std::size_t k = 0; k < d; ++k) {
    double acc = 0.0;
    for (std::size_t c = 0; c < f; ++c) acc += pooled[c] * static_cast<double>(wv[c * d + k]);
    out[k] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace

Tensor index_mask_aggregate(const Tensor& x_bin, const std::vector<std::uint32_t>& sample_set,
                            const Tensor& w) {
  if (x_bin.rank() != 2 || w.rank() != 2 || x_bin.dim(1) != w.dim(0)) {
    throw DimensionError("index_mask_aggregate: x " + shape_str(x_bin.shape()) + " vs w " +
                         shape_str(w.shape()));
  }
  const std::size_t n = x_bin.dim(0), f = x_bin.dim(1);
  std::vector<double> pooled(f, 0.0);
  const auto xv = x_bin.data();
  for (auto j : sample_set) {
    if (j >= n) {
      throw ContractError("index_mask_aggregate: index " + std::to_string(j) + " out of range for " +
                          std::to_string(n) + " nodes");
    }
    for (std::size_t c = 0; c < f; ++c) pooled[c] += xv[j * f + c];
  }
  return Tensor(Shape{w.dim(1)}, project(pooled, w));
}

Tensor dense_oracle_aggregate(const Tensor& x_bin, const Tensor& mask, const Tensor& w) {
  if (x_bin.rank() != 2 || w.rank() != 2 || x_bin.dim(1) != w.dim(0) ||
      mask.shape() != Shape{x_bin.dim(0), x_bin.dim(0)}) {
    throw DimensionError("dense_oracle_aggregate: x " + shape_str(x_bin.shape()) + ", mask " +
                         shape_str(mask.shape()) + ", w " + shape_str(w.shape()));
  }
  const std::size_t n = x_bin.dim(0), f = x_bin.dim(1), d = w.dim(1);
  const auto xv = x_bin.data();
  const auto mv = mask.data();
  std::vector<float> out(n * d);
  std::vector<double> pooled(f);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(pooled.begin(), pooled.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double m = mv[i * n + j];
      for (std::size_t c = 0; c < f; ++c) pooled[c] += m * xv[j * f + c];
    }
    const auto row = project(pooled, w);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return Tensor(Shape{n, d}, std::move(out));
}

template <typename T>
BasicTensor<T> aggregate_hop(const BasicTensor<T>& x, const NeighborSets& sets,
                             const BasicTensor<T>& w) {
  if (x.rank() < 2 || w.rank() != 2 || x.shape().back() != w.dim(0)) {
    throw DimensionError("aggregate_hop: x " + shape_str(x.shape()) + " vs w " + shape_str(w.shape()));
  }
  const std::size_t n = x.dim(x.rank() - 2), f = x.shape().back();
  if (sets.size() != n) {
    throw DimensionError("aggregate_hop: " + std::to_string(sets.size()) + " sample sets for " +
                         std::to_string(n) + " nodes");
  }
  const std::size_t rows = x.numel() / f;
  const std::size_t frames = rows / n;
  std::size_t per_frame = 0;
  for (const auto& s : sets) per_frame += s.size();
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> indices;
  offsets.reserve(rows + 1);
  indices.reserve(frames * per_frame);
  offsets.push_back(0);
  for (std::size_t g = 0; g < frames; ++g) {
    for (std::size_t i = 0; i < n; ++i) {
      for (auto j : sets[i]) {
        if (j >= n) throw ContractError("aggregate_hop: sample index out of range");
        indices.push_back(static_cast<std::uint32_t>(g * n + j));
      }
      offsets.push_back(static_cast<std::uint32_t>(indices.size()));
    }
  }
  auto pooled = index_sum_rows(reshape(x, Shape{rows, f}), offsets, indices);
  Shape out_shape = x.shape();
  out_shape.back() = w.dim(1);
  return reshape(matmul(pooled, w), std::move(out_shape));
}

template <typename T>
MssaOutput<T> mssa_forward_spikes(const BasicTensor<T>& spikes, const TwoLevelSamples& samples,
                                  const HopWeights<T>& weights, const LifParams& lif) {
  if (spikes.rank() != 4) {
    throw DimensionError("mssa_forward: expected (B, P, N, f) spikes, got " + shape_str(spikes.shape()));
  }
  // lif_scan runs along axis 1, so neuron state carries across all P frames.
  MssaOutput<T> out;
  {
    OpScope scope("hop1");
    out.hop1_potential = aggregate_hop(spikes, samples.local, weights.w1);
    out.hop1 = lif_scan(out.hop1_potential, lif);
  }
  {
    OpScope scope("hop2");
    out.hop2_potential = aggregate_hop(out.hop1, samples.semi_global, weights.w2);
    out.hop2 = lif_scan(out.hop2_potential, lif);
  }
  return out;
}

template <typename T>
MssaOutput<T> mssa_forward(const BasicTensor<T>& x_obs, const TwoLevelSamples& samples,
                           const HopWeights<T>& weights, const LifParams& lif, std::size_t ts) {
  return mssa_forward_spikes(spike_encode_sequence(x_obs, ts, lif), samples, weights, lif);
}

#define SPIKECAST_INSTANTIATE_MSSA(T)                                                            \
  template BasicTensor<T> aggregate_hop(const BasicTensor<T>&, const NeighborSets&,              \
                                        const BasicTensor<T>&);                                  \
  template MssaOutput<T> mssa_forward_spikes(const BasicTensor<T>&, const TwoLevelSamples&,      \
                                             const HopWeights<T>&, const LifParams&);            \
  template MssaOutput<T> mssa_forward(const BasicTensor<T>&, const TwoLevelSamples&,             \
                                      const HopWeights<T>&, const LifParams&, std::size_t);

SPIKECAST_INSTANTIATE_MSSA(float)
SPIKECAST_INSTANTIATE_MSSA(double)

}  // namespace spikecast

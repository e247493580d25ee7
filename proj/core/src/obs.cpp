#include "spikecast/obs.hpp"

#include <algorithm>
#include <cmath>

#include "spikecast/errors.hpp"
#include "spikecast/ops.hpp"

namespace spikecast {

namespace {

struct SlotLayout {
  std::size_t rows = 0;
  std::size_t slots = 0;
  std::vector<std::uint32_t> neighbor_rows;  // rows * slots
  std::vector<std::uint32_t> pair_index;     // i * N + j per slot, for the bias
  std::vector<std::uint8_t> padded;          // 1 where the slot is unused
};

SlotLayout layout_slots(std::size_t rows, std::size_t n, const NeighborSets& sets) {
  SlotLayout l;
  l.rows = rows;
  for (const auto& s : sets) l.slots = std::max(l.slots, s.size());
  const std::size_t total = rows * l.slots;
  l.neighbor_rows.resize(total);
  l.pair_index.resize(total);
  l.padded.resize(total);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t frame = r / n, i = r % n;
    const auto& s = sets[i];
    for (std::size_t k = 0; k < l.slots; ++k) {
      const std::size_t p = r * l.slots + k;
      if (k < s.size()) {
        l.neighbor_rows[p] = static_cast<std::uint32_t>(frame * n + s[k]);
        l.pair_index[p] = static_cast<std::uint32_t>(i * n + s[k]);
        l.padded[p] = 0;
      } else {
        l.neighbor_rows[p] = static_cast<std::uint32_t>(r);
        l.pair_index[p] = static_cast<std::uint32_t>(i * n + i);
        l.padded[p] = 1;
      }
    }
  }
  return l;
}

template <typename T>
void check_inputs(const BasicTensor<T>& x, const NeighborSets& sets, const ObsWeights<T>& w,
                  const BasicTensor<T>& adjacency) {
  if (x.rank() < 2) throw DimensionError("obs_forward: need (..., N, f) input, got " + shape_str(x.shape()));
  const std::size_t n = x.dim(x.rank() - 2), f = x.shape().back();
  if (sets.size() != n) {
    throw DimensionError("obs_forward: " + std::to_string(sets.size()) +
                         " neighbourhoods for input " + shape_str(x.shape()));
  }
  for (const auto* m : {&w.wq, &w.wk, &w.wv}) {
    if (m->rank() != 2 || m->dim(0) != f || m->dim(1) != f) {
      throw DimensionError("obs_forward: weight " + shape_str(m->shape()) + " vs feature width " +
                           std::to_string(f));
    }
  }
  for (const auto& s : sets)
    for (auto j : s)
      if (j >= n) throw ContractError("obs_forward: neighbour index out of range");
  if (adjacency.defined() && adjacency.shape() != Shape{n, n}) {
    throw DimensionError("obs_forward: adjacency " + shape_str(adjacency.shape()) + " for " +
                         std::to_string(n) + " nodes");
  }
}

template <typename T>
struct AttentionParts {
  BasicTensor<T> alpha;   // (rows, 1, K)
  BasicTensor<T> values;  // (rows, K, f)
};

template <typename T>
AttentionParts<T> attend(const BasicTensor<T>& x, const NeighborSets& sets, const ObsWeights<T>& w,
                         const BasicTensor<T>& adjacency) {
  const std::size_t n = x.dim(x.rank() - 2), f = x.shape().back();
  const std::size_t rows = x.numel() / f;
  const auto l = layout_slots(rows, n, sets);
  const std::size_t k = l.slots;

  auto flat = reshape(x, Shape{rows, f});
  auto q = reshape(matmul(flat, w.wq), Shape{rows, 1, f});
  auto keys = reshape(gather_rows(matmul(flat, w.wk), l.neighbor_rows), Shape{rows, k, f});
  auto values = reshape(gather_rows(matmul(flat, w.wv), l.neighbor_rows), Shape{rows, k, f});

  auto scores = scale(bmm(q, keys, /*transpose_b=*/true), T(1) / std::sqrt(static_cast<T>(f)));
  if (adjacency.defined()) {
    auto log_a = reshape(log(adjacency), Shape{n * n, 1});
    scores = add(scores, reshape(gather_rows(log_a, l.pair_index), Shape{rows, 1, k}));
  }
  // Padded slots vanish in the softmax; rows with no neighbours at all are
  // zeroed afterwards.
  auto alpha = softmax(masked_fill(scores, l.padded, T(-1e30)));
  alpha = masked_fill(alpha, l.padded, T(0));
  return {alpha, values};
}

}  // namespace

template <typename T>
BasicTensor<T> obs_attention(const BasicTensor<T>& x, const NeighborSets& neighborhoods,
                             const ObsWeights<T>& weights, const BasicTensor<T>& adjacency) {
  check_inputs(x, neighborhoods, weights, adjacency);
  const std::size_t f = x.shape().back();
  const std::size_t rows = x.numel() / f;
  std::size_t k = 0;
  for (const auto& s : neighborhoods) k = std::max(k, s.size());
  if (k == 0) return BasicTensor<T>(Shape{rows, 0});
  auto parts = attend(x, neighborhoods, weights, adjacency);
  return reshape(parts.alpha, Shape{rows, k});
}

template <typename T>
BasicTensor<T> obs_forward(const BasicTensor<T>& x, const NeighborSets& neighborhoods,
                           const ObsWeights<T>& weights, const BasicTensor<T>& adjacency) {
  check_inputs(x, neighborhoods, weights, adjacency);
  std::size_t k = 0;
  for (const auto& s : neighborhoods) k = std::max(k, s.size());
  if (k == 0) return x;
  auto parts = attend(x, neighborhoods, weights, adjacency);
  return add(x, reshape(bmm(parts.alpha, parts.values), x.shape()));
}

#define SPIKECAST_INSTANTIATE_OBS(T)                                                             \
  template BasicTensor<T> obs_attention(const BasicTensor<T>&, const NeighborSets&,              \
                                        const ObsWeights<T>&, const BasicTensor<T>&);            \
  template BasicTensor<T> obs_forward(const BasicTensor<T>&, const NeighborSets&,                \
                                      const ObsWeights<T>&, const BasicTensor<T>&);

SPIKECAST_INSTANTIATE_OBS(float)
SPIKECAST_INSTANTIATE_OBS(double)

}  // namespace spikecast

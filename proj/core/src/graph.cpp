#include "spikecast/graph.hpp"

#include <algorithm>
#include <numeric>

#include "op_support.hpp"
#include "spikecast/ops.hpp"
#include "spikecast/profile.hpp"

namespace spikecast {

using detail::constant_result;
using detail::grad_target;
using detail::recorded_result;
using detail::should_record;

template <typename T>
BasicTensor<T> gram(const BasicTensor<T>& e) {
  if (e.rank() != 2) throw DimensionError("gram: expected (N, d), got " + shape_str(e.shape()));
  const std::size_t n = e.dim(0), d = e.dim(1);
  const auto ev = e.data();
  std::vector<T> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      T acc = 0;
      for (std::size_t k = 0; k < d; ++k) acc += ev[i * d + k] * ev[j * d + k];
      out[i * n + j] = acc;
      out[j * n + i] = acc;
    }
  }
  record_op("gram", n, d, n, static_cast<std::uint64_t>(n) * d * n, 0);
  if (!should_record({&e})) return constant_result(Shape{n, n}, std::move(out));
  auto ei = e.impl();
  return recorded_result<T>(Shape{n, n}, std::move(out), "gram", {e},
                            [ei, n, d](const std::vector<T>& g) {
                              T* ge = grad_target(ei);
                              if (!ge) return;
                              const auto& ev = ei->data;
                              // dE = (G + G^T) E
                              for (std::size_t i = 0; i < n; ++i)
                                for (std::size_t j = 0; j < n; ++j) {
                                  const T w = g[i * n + j] + g[j * n + i];
                                  for (std::size_t k = 0; k < d; ++k) ge[i * d + k] += w * ev[j * d + k];
                                }
                            });
}

template <typename T>
BasicTensor<T> build_adjacency(const BasicTensor<T>& embeddings, T lambda) {
  if (lambda < T(0)) throw ContractError("build_adjacency: lambda must be non-negative");
  const std::size_t n = embeddings.dim(0);
  std::vector<T> eye(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = lambda;
  return add(sigmoid(gram(embeddings)), BasicTensor<T>(Shape{n, n}, std::move(eye)));
}

template <typename T>
NeighborSets prune_neighbors(const BasicTensor<T>& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw DimensionError("prune_neighbors: expected square matrix, got " + shape_str(a.shape()));
  }
  const std::size_t n = a.dim(0);
  if (n < 2) throw ContractError("prune_neighbors: need at least 2 nodes");
  const auto av = a.data();
  NeighborSets out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double self = av[i * n + i];
    if (self == 0.0) {
      throw ContractError("prune_neighbors: zero self-loop weight at node " + std::to_string(i) +
                          " makes the threshold singular");
    }
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) off += av[i * n + j];
    const double threshold = off / self;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && static_cast<double>(av[i * n + j]) > threshold)
        out[i].push_back(static_cast<std::uint32_t>(j));
  }
  return out;
}

template <typename T>
std::vector<double> node_importance(const BasicTensor<T>& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw DimensionError("node_importance: expected square matrix, got " + shape_str(a.shape()));
  }
  const std::size_t n = a.dim(0);
  const auto av = a.data();
  std::vector<double> imp(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) imp[i] += av[i * n + j];
  return imp;
}

namespace {

// First k entries of `pool` ordered by descending score, ties to lower index.
template <typename Score>
std::vector<std::uint32_t> top_k(std::vector<std::uint32_t> pool, std::size_t k, Score score) {
  std::sort(pool.begin(), pool.end(), [&](std::uint32_t x, std::uint32_t y) {
    const double sx = score(x), sy = score(y);
    if (sx != sy) return sx > sy;
    return x < y;
  });
  if (pool.size() > k) pool.resize(k);
  return pool;
}

}  // namespace

template <typename T>
TwoLevelSamples sample_two_level(const BasicTensor<T>& a, const NeighborSets& candidates,
                                 const std::vector<double>& importance, std::size_t k1,
                                 std::size_t k2) {
  const std::size_t n = candidates.size();
  if (a.rank() != 2 || a.dim(0) != n || a.dim(1) != n || importance.size() != n) {
    throw DimensionError("sample_two_level: adjacency " + shape_str(a.shape()) + " vs " +
                         std::to_string(n) + " candidate sets");
  }
  const auto av = a.data();
  TwoLevelSamples out;
  out.local.resize(n);
  out.semi_global.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.local[i] = top_k(candidates[i], k1, [&](std::uint32_t j) { return double(av[i * n + j]); });
  }
  std::vector<std::uint8_t> excluded(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(excluded.begin(), excluded.end(), 0);
    excluded[i] = 1;
    for (auto j : out.local[i]) excluded[j] = 1;
    std::vector<std::uint32_t> pool;
    for (auto j : out.local[i]) {
      for (auto k : candidates[j]) {
        if (!excluded[k]) {
          excluded[k] = 1;
          pool.push_back(k);
        }
      }
    }
    out.semi_global[i] = top_k(std::move(pool), k2, [&](std::uint32_t k) { return importance[k]; });
  }
  return out;
}

AdaptiveGraph build_graph(const Tensor& embeddings, float lambda, std::size_t k1, std::size_t k2) {
  AdaptiveGraph g;
  g.a = build_adjacency(embeddings, lambda);
  g.lambda = lambda;
  g.candidates = prune_neighbors(g.a);
  g.importance = node_importance(g.a);
  g.samples = sample_two_level(g.a, g.candidates, g.importance, k1, k2);
  return g;
}

std::vector<float> neighbor_mask(const NeighborSets& sets, std::size_t n) {
  std::vector<float> m(n * n, 0.0f);
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (auto j : sets[i]) m[i * n + j] = 1.0f;
  return m;
}

#define SPIKECAST_INSTANTIATE_GRAPH(T)                                                         \
  template BasicTensor<T> gram(const BasicTensor<T>&);                                         \
  template BasicTensor<T> build_adjacency(const BasicTensor<T>&, T);                           \
  template NeighborSets prune_neighbors(const BasicTensor<T>&);                                \
  template std::vector<double> node_importance(const BasicTensor<T>&);                         \
  template TwoLevelSamples sample_two_level(const BasicTensor<T>&, const NeighborSets&,        \
                                            const std::vector<double>&, std::size_t, std::size_t);

SPIKECAST_INSTANTIATE_GRAPH(float)
SPIKECAST_INSTANTIATE_GRAPH(double)

}  // namespace spikecast

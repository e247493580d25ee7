#include <benchmark/benchmark.h>

#include <random>

#include "spikecast/graph.hpp"
#include "spikecast/mssa.hpp"
#include "spikecast/ops.hpp"

using namespace spikecast;

namespace {

struct Instance {
  Tensor x;
  Tensor w;
  Tensor mask;
  NeighborSets sets;
};

// N nodes with binary features of width F, k sampled neighbours each.
Instance make_instance(std::size_t n, std::size_t f, std::size_t d, std::size_t k) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution fire(0.2);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::vector<float> xv(n * f), wv(f * d);
  for (auto& v : xv) v = fire(rng) ? 1.f : 0.f;
  for (auto& v : wv) v = u(rng);
  NeighborSets sets(n);
  std::uniform_int_distribution<std::uint32_t> node(0, static_cast<std::uint32_t>(n - 1));
  for (std::size_t i = 0; i < n; ++i)
    while (sets[i].size() < k) {
      const auto j = node(rng);
      if (j != i) sets[i].push_back(j);
    }
  Tensor mask({n, n}, neighbor_mask(sets, n));
  return {Tensor({n, f}, xv), Tensor({f, d}, wv), mask, sets};
}

void BM_IndexMaskAggregate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto inst = make_instance(n, 32, 32, 8);
  for (auto _ : state) {
    for (std::size_t i = 0; i < n; ++i) benchmark::DoNotOptimize(index_mask_aggregate(inst.x, inst.sets[i], inst.w));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_DenseOracleAggregate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto inst = make_instance(n, 32, 32, 8);
  for (auto _ : state) benchmark::DoNotOptimize(dense_oracle_aggregate(inst.x, inst.mask, inst.w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

// The batched forward path against the dense product it replaces.
void BM_AggregateHop(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto inst = make_instance(n, 32, 32, 8);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_hop(inst.x, inst.sets, inst.w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_DenseMaskMatmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto inst = make_instance(n, 32, 32, 8);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(matmul(inst.mask, inst.x), inst.w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_IndexMaskAggregate)->RangeMultiplier(4)->Range(16, 1024);
BENCHMARK(BM_DenseOracleAggregate)->RangeMultiplier(4)->Range(16, 1024);
BENCHMARK(BM_AggregateHop)->RangeMultiplier(4)->Range(16, 1024);
BENCHMARK(BM_DenseMaskMatmul)->RangeMultiplier(4)->Range(16, 1024);

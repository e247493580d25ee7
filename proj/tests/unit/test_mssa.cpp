#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "spikecast/errors.hpp"
#include "spikecast/graph.hpp"
#include "spikecast/mssa.hpp"
#include "spikecast/ops.hpp"
#include "spikecast/profile.hpp"

using namespace spikecast;

namespace {

Tensor ftensor(Shape shape, const oracle::Vec& v) {
  return Tensor(std::move(shape), std::vector<float>(v.begin(), v.end()));
}

NeighborSets random_sets(std::mt19937_64& rng, std::size_t n, std::size_t max_size) {
  NeighborSets sets(n);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < n && sets[i].size() < max_size; ++j)
      if (j != i && coin(rng)) sets[i].push_back(j);
  }
  return sets;
}

}  // namespace

TEST(IndexMask, EmptySetGivesZero) {
  std::mt19937_64 rng(1);
  auto x = ftensor({4, 3}, oracle::binary(rng, 12, 0.5));
  auto w = ftensor({3, 5}, oracle::uniform(rng, 15, -1, 1));
  auto m = index_mask_aggregate(x, {}, w);
  ASSERT_EQ(m.shape(), (Shape{5}));
  for (float v : m.data()) EXPECT_EQ(v, 0.f);
}

TEST(IndexMask, SingleNeighbourIdentity) {
  std::mt19937_64 rng(2);
  auto x = ftensor({4, 3}, oracle::binary(rng, 12, 0.5));
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto m = index_mask_aggregate(x, {2}, eye);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(m[c], x[2 * 3 + c]);
}

TEST(IndexMask, OutOfRangeIndex) {
  EXPECT_THROW(index_mask_aggregate(Tensor({2, 2}), {5}, Tensor({2, 2})), ContractError);
}

TEST(DenseOracle, IdentityAndZeroMasks) {
  std::mt19937_64 rng(3);
  auto x = ftensor({4, 3}, oracle::binary(rng, 12, 0.5));
  auto w = ftensor({3, 2}, oracle::uniform(rng, 6, -1, 1));
  oracle::Vec eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[i * 5] = 1;
  auto id = dense_oracle_aggregate(x, ftensor({4, 4}, eye), w);
  auto xw = matmul(x, w);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(id[i], xw[i]);
  auto zero = dense_oracle_aggregate(x, Tensor({4, 4}), w);
  for (float v : zero.data()) EXPECT_EQ(v, 0.f);
}

TEST(IndexMask, MatchesDenseOracle) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 16, f = 8, d = 6;
    auto x = ftensor({n, f}, oracle::binary(rng, n * f, 0.4));
    auto w = ftensor({f, d}, oracle::uniform(rng, f * d, -1, 1));
    auto sets = random_sets(rng, n, n);
    auto dense = dense_oracle_aggregate(x, Tensor({n, n}, neighbor_mask(sets, n)), w);
    for (std::size_t i = 0; i < n; ++i) {
      auto m = index_mask_aggregate(x, sets[i], w);
      for (std::size_t c = 0; c < d; ++c) ASSERT_NEAR(m[c], dense[i * d + c], 1e-6);
    }
  }
}

TEST(AggregateHop, BatchedMatchesPerNode) {
  std::mt19937_64 rng(5);
  const std::size_t frames = 3, n = 7, f = 4, d = 5;
  auto x = ftensor({frames, n, f}, oracle::binary(rng, frames * n * f, 0.5));
  auto w = ftensor({f, d}, oracle::uniform(rng, f * d, -1, 1));
  auto sets = random_sets(rng, n, 3);
  auto out = aggregate_hop(x, sets, w);
  ASSERT_EQ(out.shape(), (Shape{frames, n, d}));
  for (std::size_t g = 0; g < frames; ++g) {
    auto frame = reshape(slice_rows(reshape(x, {frames * n, f}), g * n, (g + 1) * n), {n, f});
    for (std::size_t i = 0; i < n; ++i) {
      auto m = index_mask_aggregate(frame, sets[i], w);
      for (std::size_t c = 0; c < d; ++c) ASSERT_NEAR(out[(g * n + i) * d + c], m[c], 1e-6);
    }
  }
}

TEST(Mssa, ZeroInputStaysSilent) {
  std::mt19937_64 rng(6);
  const std::size_t n = 5;
  NeighborSets sets{{1, 2}, {0}, {3, 4}, {2}, {0, 1}};
  TwoLevelSamples s{sets, sets};
  HopWeights<float> w{ftensor({3, 4}, oracle::uniform(rng, 12, -1, 1)),
                      ftensor({4, 4}, oracle::uniform(rng, 16, -1, 1))};
  auto out = mssa_forward_spikes(Tensor({2, 6, n, 3}), s, w, LifParams{});
  for (float v : out.hop1.data()) EXPECT_EQ(v, 0.f);
  for (float v : out.hop2.data()) EXPECT_EQ(v, 0.f);
}

TEST(Mssa, SingleNodeIsSilent) {
  std::mt19937_64 rng(7);
  TwoLevelSamples s{NeighborSets(1), NeighborSets(1)};
  HopWeights<float> w{ftensor({2, 3}, oracle::uniform(rng, 6, -1, 1)),
                      ftensor({3, 3}, oracle::uniform(rng, 9, -1, 1))};
  auto out = mssa_forward(Tensor::full({1, 4, 1, 2}, 5.f), s, w, LifParams{}, 4);
  for (float v : out.hop2.data()) EXPECT_EQ(v, 0.f);
}

TEST(Mssa, MatchesComposedOracle) {
  std::mt19937_64 rng(8);
  const std::size_t n = 6, f = 3, d1 = 5, d2 = 4, b = 2, p = 12;
  const LifParams lif{0.5f, 1.0f, 0.0f, 2.0f};
  auto x = ftensor({b, p, n, f}, oracle::binary(rng, b * p * n * f, 0.5));
  HopWeights<float> w{ftensor({f, d1}, oracle::uniform(rng, f * d1, -0.5, 1.5)),
                      ftensor({d1, d2}, oracle::uniform(rng, d1 * d2, -0.5, 1.5))};
  auto e = ftensor({n, 3}, oracle::uniform(rng, n * 3, -1, 1));
  auto g = build_graph(e, static_cast<float>(n - 1), 2, 2);
  auto out = mssa_forward_spikes(x, g.samples, w, lif);

  const Tensor m1(Shape{n, n}, neighbor_mask(g.samples.local, n));
  const Tensor m2(Shape{n, n}, neighbor_mask(g.samples.semi_global, n));
  for (std::size_t bb = 0; bb < b; ++bb) {
    Tensor h1({n, d1}), h2({n, d2});
    for (std::size_t t = 0; t < p; ++t) {
      const std::size_t frame = bb * p + t;
      auto xt = reshape(slice_rows(reshape(x, {b * p * n, f}), frame * n, (frame + 1) * n), {n, f});
      auto pot1 = dense_oracle_aggregate(xt, m1, w.w1);
      auto r1 = lif_step(lif, h1, pot1);
      h1 = r1.h;
      auto pot2 = dense_oracle_aggregate(r1.spike, m2, w.w2);
      auto r2 = lif_step(lif, h2, pot2);
      h2 = r2.h;
      for (std::size_t i = 0; i < n * d1; ++i) {
        ASSERT_NEAR(out.hop1_potential[frame * n * d1 + i], pot1[i], 1e-6);
        ASSERT_EQ(out.hop1[frame * n * d1 + i], r1.spike[i]);
      }
      for (std::size_t i = 0; i < n * d2; ++i) {
        ASSERT_NEAR(out.hop2_potential[frame * n * d2 + i], pot2[i], 1e-6);
        ASSERT_EQ(out.hop2[frame * n * d2 + i], r2.spike[i]);
      }
    }
  }
  for (float v : out.hop1.data()) ASSERT_TRUE(v == 0.f || v == 1.f);
  for (float v : out.hop2.data()) ASSERT_TRUE(v == 0.f || v == 1.f);
}

TEST(Mssa, NoNodeByNodeProductOnPath) {
  std::mt19937_64 rng(9);
  const std::size_t n = 11, f = 3, d1 = 5, d2 = 7;
  auto x = ftensor({1, 8, n, f}, oracle::uniform(rng, 8 * n * f, -1, 3));
  HopWeights<float> w{ftensor({f, d1}, oracle::uniform(rng, f * d1, -1, 1)),
                      ftensor({d1, d2}, oracle::uniform(rng, d1 * d2, -1, 1))};
  auto g = build_graph(ftensor({n, 4}, oracle::uniform(rng, n * 4, -1, 1)), 10.f, 4, 4);
  OpProfile profile;
  {
    OpScope scope("mssa");
    mssa_forward(x, g.samples, w, LifParams{}, 2);
  }
  auto recs = profile.in_scope("mssa");
  ASSERT_FALSE(recs.empty());
  for (const auto& r : recs) {
    if (r.macs == 0) continue;
    EXPECT_NE(r.inner, n) << r.op << " contracts over the node axis";
    EXPECT_NE(r.op, "gram");
  }
}

TEST(Mssa, AdditionsScaleWithSampleSize) {
  std::mt19937_64 rng(10);
  auto adds_for = [&](std::size_t n, const NeighborSets& sets) {
    auto x = ftensor({1, 4, n, 3}, oracle::binary(rng, 4 * n * 3, 0.5));
    HopWeights<float> w{Tensor({3, 2}), Tensor({2, 2})};
    OpProfile profile;
    mssa_forward_spikes(x, TwoLevelSamples{sets, NeighborSets(n)}, w, LifParams{});
    std::uint64_t adds = 0;
    for (const auto& r : profile.records())
      if (r.op == "index_sum_rows") adds += r.adds;
    return adds;
  };
  NeighborSets small(8), large(32);
  std::size_t total_small = 0, total_large = 0;
  for (std::uint32_t i = 0; i < 8; ++i) {
    small[i] = {(i + 1) % 8u, (i + 2) % 8u};
    total_small += 2;
  }
  for (std::uint32_t i = 0; i < 32; ++i) {
    large[i] = {(i + 1) % 32u, (i + 2) % 32u, (i + 3) % 32u};
    total_large += 3;
  }
  const auto a = adds_for(8, small), b = adds_for(32, large);
  EXPECT_GT(a, 0u);
  EXPECT_EQ(a * total_large, b * total_small);
}

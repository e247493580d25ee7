#include "spikecast/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "spikecast/errors.hpp"

namespace spikecast {

namespace {

constexpr std::int64_t kStart = 1704067200;  // 2024-01-01T00:00:00Z, a Monday
constexpr std::array<double, 7> kWeekday = {1.0, 1.05, 1.1, 1.05, 1.0, 0.75, 0.6};

void link(NeighborSets& sets, std::size_t a, std::size_t b) {
  auto add = [&](std::size_t from, std::size_t to) {
    auto& s = sets[from];
    const auto v = static_cast<std::uint32_t>(to);
    if (std::find(s.begin(), s.end(), v) == s.end()) s.push_back(v);
  };
  add(a, b);
  add(b, a);
}

}  // namespace

NeighborSets synth_coupling(std::size_t nodes, std::uint64_t seed) {
  if (nodes < 2) throw ContractError("synth_generate: need at least 2 nodes");
  NeighborSets sets(nodes);
  for (std::size_t i = 0; i < nodes; ++i) link(sets, i, (i + 1) % nodes);
  if (nodes >= 4) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<std::size_t> pick(0, nodes - 1);
    const std::size_t chords = std::max<std::size_t>(1, nodes / 4);
    std::size_t made = 0;
    for (std::size_t attempt = 0; made < chords && attempt < 100 * chords; ++attempt) {
      const std::size_t a = pick(rng), b = pick(rng);
      const auto& s = sets[a];
      if (a == b || std::find(s.begin(), s.end(), static_cast<std::uint32_t>(b)) != s.end()) continue;
      link(sets, a, b);
      ++made;
    }
  }
  for (auto& s : sets) std::sort(s.begin(), s.end());
  return sets;
}

SeriesDataset synth_generate(std::size_t nodes, std::size_t steps, std::uint64_t seed,
                             const SynthOptions& options) {
  const NeighborSets coupled = synth_coupling(nodes, seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp_dist(0.5, 1.5);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> offset_dist(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<double> amp(nodes), phase(nodes), offset(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    amp[i] = amp_dist(rng);
    phase[i] = phase_dist(rng);
    offset[i] = offset_dist(rng);
  }

  SeriesDataset ds;
  ds.interval_seconds = 3600;
  for (std::size_t i = 0; i < nodes; ++i) ds.node_names.push_back("node" + std::to_string(i));
  std::vector<double> x(steps * nodes, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const std::int64_t ts = kStart + static_cast<std::int64_t>(t) * 3600;
    ds.timestamps.push_back(ts);
    const Calendar cal = calendar_of(ts);
    const double angle = 2.0 * std::numbers::pi * cal.hour / 24.0;
    for (std::size_t i = 0; i < nodes; ++i) {
      double v = offset[i] + options.amplitude * amp[i] * kWeekday[cal.dow] * std::sin(angle + phase[i]);
      if (t >= options.lag && !coupled[i].empty()) {
        double acc = 0.0;
        for (auto j : coupled[i]) acc += x[(t - options.lag) * nodes + j];
        v += options.coupling * acc / static_cast<double>(coupled[i].size());
      }
      v += options.noise * noise(rng);
      x[t * nodes + i] = v;
    }
  }
  ds.values.assign(x.begin(), x.end());
  return ds;
}

}  // namespace spikecast

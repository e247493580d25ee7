#pragma once

// Graph-coupled synthetic benchmark. Nodes sit on a ring with a few random
// chords; each node follows a daily sinusoid whose amplitude is modulated by
// day of week, plus a coupling term on its neighbours' lagged values and
// Gaussian noise. Hourly samples starting Monday 2024-01-01 00:00 UTC.

#include <cstddef>
#include <cstdint>

#include "spikecast/dataset.hpp"
#include "spikecast/graph.hpp"

namespace spikecast {

struct SynthOptions {
  double coupling = 0.3;
  double noise = 0.05;
  double amplitude = 1.0;  // scale of the seasonal component
  std::size_t lag = 1;
};

/// Ring-plus-chords coupling graph used by synth_generate for this seed.
NeighborSets synth_coupling(std::size_t nodes, std::uint64_t seed);

/// Throws ContractError for nodes < 2.
SeriesDataset synth_generate(std::size_t nodes, std::size_t steps, std::uint64_t seed,
                             const SynthOptions& options = {});

}  // namespace spikecast

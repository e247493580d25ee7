#pragma once

// Theoretical inference energy from operation counts: real-valued
// multiply-accumulates (MAC) versus spike-gated accumulates (AC).
//
// Spiking rules: dense projections cost inputs * fan_out MACs, spike-driven
// projections cost active_spikes * fan_out ACs, and each LIF neuron update
// costs one AC. The dense twin keeps every shape but counts all of it,
// LIF updates included, as MACs.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spikecast/dataset.hpp"
#include "spikecast/model.hpp"

namespace spikecast {

struct LayerOps {
  std::string name;
  std::uint64_t mac_ops = 0;
  std::uint64_t ac_ops = 0;
  double spike_rate = 0.0;  // input activity for spike projections, firing rate for LIF layers
};

struct OpCounts {
  std::vector<LayerOps> layers;
  std::size_t params = 0;

  std::uint64_t mac_ops() const;
  std::uint64_t ac_ops() const;
};

OpCounts count_ops(const ForwardTrace& trace, std::size_t params);
OpCounts count_dense_twin(const ForwardTrace& trace, std::size_t params);

struct ModelOps {
  OpCounts spiking;
  OpCounts twin;
};

/// One gradient-free forward pass over `batch` with tracing.
ModelOps count_ops(const ForecastModel& model, const WindowBatch& batch);

struct LayerEnergy {
  std::string name;
  std::uint64_t mac_ops = 0;
  std::uint64_t ac_ops = 0;
  double spike_rate = 0.0;
  double energy_mj = 0.0;
};

struct EnergyReport {
  std::vector<LayerEnergy> layers;
  std::size_t params = 0;
  std::uint64_t mac_ops = 0;
  std::uint64_t ac_ops = 0;
  double energy_mj = 0.0;
  double e_mac_pj = 4.6;
  double e_ac_pj = 0.9;
  // Dense-twin comparison; zero when no twin was supplied.
  std::uint64_t twin_ops = 0;
  double twin_energy_mj = 0.0;
  double reduction_pct = 0.0;
};

/// Throws ContractError unless e_mac_pj and e_ac_pj are positive.
EnergyReport estimate_energy(const OpCounts& counts, double e_mac_pj = 4.6, double e_ac_pj = 0.9);
EnergyReport estimate_energy(const OpCounts& counts, const OpCounts& twin, double e_mac_pj = 4.6,
                             double e_ac_pj = 0.9);

/// "key: value" lines. r2 is appended when given.
void write_energy_report(std::ostream& out, const EnergyReport& report, std::optional<double> r2 = {});
/// layer,mac_ops,ac_ops,spike_rate,energy_mj
void write_energy_csv(std::ostream& out, const EnergyReport& report);
/// Model | Param (M) | Ops (G) | Energy (mJ) | Reduction | R2, one row for the
/// spiking model and one for its dense twin.
std::string energy_table(const EnergyReport& report, std::optional<double> r2 = {});

}  // namespace spikecast

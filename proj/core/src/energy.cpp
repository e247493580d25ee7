#include "spikecast/energy.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include "spikecast/errors.hpp"

namespace spikecast {

std::uint64_t OpCounts::mac_ops() const {
  std::uint64_t total = 0;
  for (const auto& l : layers) total += l.mac_ops;
  return total;
}

std::uint64_t OpCounts::ac_ops() const {
  std::uint64_t total = 0;
  for (const auto& l : layers) total += l.ac_ops;
  return total;
}

namespace {

double rate(std::uint64_t part, std::uint64_t whole) {
  return whole ? static_cast<double>(part) / static_cast<double>(whole) : 0.0;
}

}  // namespace

OpCounts count_ops(const ForwardTrace& trace, std::size_t params) {
  OpCounts out;
  out.params = params;
  for (const auto& l : trace.layers) {
    LayerOps ops;
    ops.name = l.name;
    ops.mac_ops = l.extra_macs;
    if (l.binary) {
      ops.ac_ops = l.active * l.fan_out;
      ops.spike_rate = rate(l.active, l.inputs);
    } else {
      ops.mac_ops += l.inputs * l.fan_out;
    }
    if (l.neurons) {
      ops.ac_ops += l.neurons;
      ops.spike_rate = rate(l.spikes, l.neurons);
    }
    out.layers.push_back(ops);
  }
  return out;
}

OpCounts count_dense_twin(const ForwardTrace& trace, std::size_t params) {
  OpCounts out;
  out.params = params;
  for (const auto& l : trace.layers) {
    LayerOps ops;
    ops.name = l.name;
    ops.mac_ops = l.extra_macs + l.inputs * l.fan_out + l.neurons;
    out.layers.push_back(ops);
  }
  return out;
}

ModelOps count_ops(const ForecastModel& model, const WindowBatch& batch) {
  NoGradGuard guard;
  ForwardTrace trace;
  model.forward(batch, &trace);
  return {count_ops(trace, model.parameter_count()), count_dense_twin(trace, model.parameter_count())};
}

EnergyReport estimate_energy(const OpCounts& counts, double e_mac_pj, double e_ac_pj) {
  if (!(e_mac_pj > 0.0) || !(e_ac_pj > 0.0)) {
    throw ContractError("estimate_energy: energy per operation must be positive");
  }
  EnergyReport r;
  r.params = counts.params;
  r.e_mac_pj = e_mac_pj;
  r.e_ac_pj = e_ac_pj;
  for (const auto& l : counts.layers) {
    LayerEnergy e;
    e.name = l.name;
    e.mac_ops = l.mac_ops;
    e.ac_ops = l.ac_ops;
    e.spike_rate = l.spike_rate;
    // pJ -> mJ
    e.energy_mj = (static_cast<double>(l.mac_ops) * e_mac_pj + static_cast<double>(l.ac_ops) * e_ac_pj) * 1e-9;
    r.mac_ops += l.mac_ops;
    r.ac_ops += l.ac_ops;
    r.energy_mj += e.energy_mj;
    r.layers.push_back(e);
  }
  return r;
}

EnergyReport estimate_energy(const OpCounts& counts, const OpCounts& twin, double e_mac_pj, double e_ac_pj) {
  EnergyReport r = estimate_energy(counts, e_mac_pj, e_ac_pj);
  const EnergyReport dense = estimate_energy(twin, e_mac_pj, e_ac_pj);
  r.twin_ops = dense.mac_ops + dense.ac_ops;
  r.twin_energy_mj = dense.energy_mj;
  r.reduction_pct = dense.energy_mj > 0.0 ? 100.0 * (dense.energy_mj - r.energy_mj) / dense.energy_mj : 0.0;
  return r;
}

void write_energy_report(std::ostream& out, const EnergyReport& r, std::optional<double> r2) {
  out << "params: " << r.params << '\n'
      << "params_m: " << static_cast<double>(r.params) * 1e-6 << '\n'
      << "mac_ops: " << r.mac_ops << '\n'
      << "ac_ops: " << r.ac_ops << '\n'
      << "ops_g: " << static_cast<double>(r.mac_ops + r.ac_ops) * 1e-9 << '\n'
      << "energy_mj: " << r.energy_mj << '\n'
      << "e_mac_pj: " << r.e_mac_pj << '\n'
      << "e_ac_pj: " << r.e_ac_pj << '\n'
      << "twin_ops_g: " << static_cast<double>(r.twin_ops) * 1e-9 << '\n'
      << "twin_energy_mj: " << r.twin_energy_mj << '\n'
      << "reduction_pct: " << r.reduction_pct << '\n';
  if (r2) out << "r2: " << *r2 << '\n';
}

void write_energy_csv(std::ostream& out, const EnergyReport& r) {
  out << "layer,mac_ops,ac_ops,spike_rate,energy_mj\n";
  for (const auto& l : r.layers) {
    out << l.name << ',' << l.mac_ops << ',' << l.ac_ops << ',' << l.spike_rate << ',' << l.energy_mj << '\n';
  }
}

std::string energy_table(const EnergyReport& r, std::optional<double> r2) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %10s %9s %12s %10s %8s\n", "Model", "Param (M)", "Ops (G)", "Energy (mJ)",
                "Reduction", "R2");
  os << line;
  const std::string r2_text = r2 ? std::to_string(*r2).substr(0, 6) : "-";
  const double params_m = static_cast<double>(r.params) * 1e-6;
  std::snprintf(line, sizeof line, "%-12s %10.4f %9.4f %12.6f %9.2f%% %8s\n", "spiking", params_m,
                static_cast<double>(r.mac_ops + r.ac_ops) * 1e-9, r.energy_mj, r.reduction_pct, r2_text.c_str());
  os << line;
  std::snprintf(line, sizeof line, "%-12s %10.4f %9.4f %12.6f %10s %8s\n", "dense twin", params_m,
                static_cast<double>(r.twin_ops) * 1e-9, r.twin_energy_mj, "-", "-");
  os << line;
  return os.str();
}

}  // namespace spikecast

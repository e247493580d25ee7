#pragma once

// End-to-end forecaster:
//   embed -> adaptive graph -> OBS -> spike encode -> MSSA (2 hops)
//   -> LSTM and/or SSA -> gate -> per-node linear head.
//
// Ablations:
//   W1  LSTM -> head
//   W2  MSSA spikes -> SSA -> head
//   W3  LSTM -> spike encode -> SSA -> head
//   W4  LSTM and (LSTM -> spike encode -> SSA) mixed by the gate -> head

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spikecast/dataset.hpp"
#include "spikecast/graph.hpp"
#include "spikecast/spiking.hpp"
#include "spikecast/tensor.hpp"

namespace spikecast {

enum class Ablation { W1 = 1, W2 = 2, W3 = 3, W4 = 4 };

std::string to_string(Ablation a);
/// Accepts "W1".."W4" (case-insensitive). Throws ContractError otherwise.
Ablation parse_ablation(const std::string& text);

inline bool has_lstm(Ablation a) { return a != Ablation::W2; }
inline bool has_ssa(Ablation a) { return a != Ablation::W1; }
inline bool has_gate(Ablation a) { return a == Ablation::W4; }

struct ModelConfig {
  std::size_t nodes = 8;
  std::size_t input_len = 64;
  std::size_t horizon = 3;
  std::size_t embed_dim = 16;
  std::size_t k1 = 4;
  std::size_t k2 = 4;
  std::size_t d1 = 32;
  std::size_t d2 = 32;
  std::size_t h_dim = 64;
  std::size_t d_k = 32;
  std::size_t ts = 4;
  LifParams lif;
  std::optional<float> lambda;  // unset: nodes - 1
  float learning_rate = 1e-3f;
  std::size_t epochs = 8;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  Ablation ablation = Ablation::W4;
  std::int64_t interval_seconds = 3600;

  float resolved_lambda() const;
  bool uses_minute() const { return uses_minute_of_hour(interval_seconds); }
  /// Per-node input width: value plus 4 channels per calendar table.
  std::size_t feature_width() const { return 1 + 4 * (uses_minute() ? 3 : 2); }
  /// Throws ContractError on zero widths or invalid LIF settings.
  void validate() const;
};

using NamedTensor = std::pair<std::string, Tensor>;

/// Projection or LIF population seen during one forward pass. Projection
/// entries consume `inputs` values (`active` of them nonzero when the input
/// is a spike tensor) and fan each one out to `fan_out` outputs. LIF
/// entries report neuron updates and emitted spikes.
struct LayerTrace {
  std::string name;
  bool binary = false;
  std::uint64_t inputs = 0;
  std::uint64_t active = 0;
  std::uint64_t fan_out = 0;
  std::uint64_t extra_macs = 0;  // real-valued products outside the projection
  std::uint64_t neurons = 0;
  std::uint64_t spikes = 0;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
};

class ForecastModel {
 public:
  /// Initialises every parameter from config.seed.
  explicit ForecastModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  /// nullptr when the model has no parameter of that name.
  const Tensor* find(const std::string& name) const;
  Tensor& param(const std::string& name);
  std::size_t parameter_count() const;

  const NormStats& norm() const { return norm_; }
  void set_norm(NormStats stats) { norm_ = std::move(stats); }

  /// (B, T, N) window -> (B, T, N, f) features with calendar embeddings
  /// broadcast to every node.
  Tensor embed_inputs(const WindowBatch& batch) const;

  /// Adjacency and samples from the current node embeddings.
  AdaptiveGraph graph() const;

  /// Normalised forecast (B, L, N).
  Tensor forward(const WindowBatch& batch, ForwardTrace* trace = nullptr) const;

  /// De-normalised forecast, row-major (B, L, N). Throws ContractError when
  /// normalisation statistics are missing.
  std::vector<float> predict(const WindowBatch& batch) const;

  /// Parameters, config scalars ("config.*") and stats ("norm.mean",
  /// "norm.std") as named tensors.
  std::vector<NamedTensor> state() const;
  /// Inverse of state(). Throws ContractError when a tensor required by the
  /// stored ablation is missing or has the wrong shape.
  static ForecastModel from_state(const std::vector<NamedTensor>& tensors);

 private:
  void init_parameters();

  ModelConfig config_;
  std::vector<NamedTensor> params_;
  NormStats norm_;
};

/// Per-node linear head: fused (B*N, h) -> (B, L, N), with w (N, h+1, L)
/// whose last input row is the bias.
template <typename T>
BasicTensor<T> prediction_head(const BasicTensor<T>& fused, const BasicTensor<T>& w, std::size_t batch);

}  // namespace spikecast

#include "spikecast/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "spikecast/dsf.hpp"
#include "spikecast/errors.hpp"
#include "spikecast/mssa.hpp"
#include "spikecast/obs.hpp"
#include "spikecast/ops.hpp"
#include "spikecast/profile.hpp"

namespace spikecast {

std::string to_string(Ablation a) { return "W" + std::to_string(static_cast<int>(a)); }

Ablation parse_ablation(const std::string& text) {
  if (text.size() == 2 && (text[0] == 'W' || text[0] == 'w') && text[1] >= '1' && text[1] <= '4') {
    return static_cast<Ablation>(text[1] - '0');
  }
  throw ContractError("unknown ablation '" + text + "' (expected W1, W2, W3 or W4)");
}

float ModelConfig::resolved_lambda() const {
  return lambda ? *lambda : static_cast<float>(nodes > 1 ? nodes - 1 : 1);
}

void ModelConfig::validate() const {
  const std::pair<const char*, std::size_t> sizes[] = {
      {"nodes", nodes}, {"input_len", input_len}, {"horizon", horizon}, {"embed_dim", embed_dim},
      {"d1", d1},       {"d2", d2},               {"h_dim", h_dim},     {"d_k", d_k},
      {"ts", ts},       {"batch_size", batch_size}};
  for (const auto& [name, value] : sizes) {
    if (value == 0) throw ContractError(std::string("config: ") + name + " must be >= 1");
  }
  if (nodes < 2) throw ContractError("config: nodes must be >= 2");
  if (resolved_lambda() < 0.0f) throw ContractError("config: lambda must be non-negative");
  if (!(learning_rate >= 0.0f)) throw ContractError("config: learning_rate must be non-negative");
  if (interval_seconds <= 0) throw ContractError("config: interval_seconds must be positive");
  lif.validate();
}

namespace {

struct ParamSpec {
  std::string name;
  Shape shape;
};

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  const std::size_t f = c.feature_width(), h = c.h_dim, spikes = c.d1 + c.d2;
  std::vector<ParamSpec> specs = {{"embed.nodes", {c.nodes, c.embed_dim}}};
  if (c.uses_minute()) specs.push_back({"embed.minute", {60, 4}});
  specs.push_back({"embed.hour", {24, 4}});
  specs.push_back({"embed.dow", {7, 4}});
  specs.push_back({"obs.wq", {f, f}});
  specs.push_back({"obs.wk", {f, f}});
  specs.push_back({"obs.wv", {f, f}});
  specs.push_back({"mssa.w1", {f, c.d1}});
  specs.push_back({"mssa.w2", {c.d1, c.d2}});
  if (has_lstm(c.ablation)) {
    specs.push_back({"lstm.wx", {c.ts * spikes, 4 * h}});
    specs.push_back({"lstm.wh", {h, 4 * h}});
    specs.push_back({"lstm.b", {4 * h}});
  }
  if (has_ssa(c.ablation)) {
    const std::size_t in = c.ablation == Ablation::W2 ? spikes : h;
    specs.push_back({"ssa.wq", {in, c.d_k}});
    specs.push_back({"ssa.wk", {in, c.d_k}});
    specs.push_back({"ssa.wv", {in, c.d_k}});
    specs.push_back({"ssa.proj.w", {c.d_k, h}});
    specs.push_back({"ssa.proj.b", {h}});
  }
  if (has_gate(c.ablation)) {
    specs.push_back({"gate.w", {2 * h, h}});
    specs.push_back({"gate.b", {h}});
  }
  specs.push_back({"head.w", {c.nodes, h + 1, c.horizon}});
  return specs;
}

std::uint64_t nnz(std::span<const float> v) {
  return static_cast<std::uint64_t>(std::count_if(v.begin(), v.end(), [](float x) { return x != 0.0f; }));
}

// Spikes gathered by a hop: sum over frames of nnz(x_j) times the number of
// sample sets containing j. x is (frames, N, F).
std::uint64_t gathered_active(const Tensor& x, const NeighborSets& sets) {
  const std::size_t n = sets.size(), f = x.shape().back();
  std::vector<std::uint64_t> indeg(n, 0);
  for (const auto& s : sets)
    for (auto j : s) ++indeg[j];
  const auto v = x.data();
  std::uint64_t total = 0;
  const std::size_t frames = x.numel() / (n * f);
  for (std::size_t g = 0; g < frames; ++g)
    for (std::size_t j = 0; j < n; ++j) {
      if (indeg[j] == 0) continue;
      total += indeg[j] * nnz(v.subspan((g * n + j) * f, f));
    }
  return total;
}

std::uint64_t total_size(const NeighborSets& sets) {
  std::uint64_t k = 0;
  for (const auto& s : sets) k += s.size();
  return k;
}

LayerTrace dense_layer(std::string name, std::uint64_t inputs, std::uint64_t fan_out,
                       std::uint64_t extra = 0) {
  LayerTrace l;
  l.name = std::move(name);
  l.inputs = inputs;
  l.fan_out = fan_out;
  l.extra_macs = extra;
  return l;
}

LayerTrace spike_layer(std::string name, std::uint64_t inputs, std::uint64_t active, std::uint64_t fan_out,
                       std::uint64_t extra = 0) {
  LayerTrace l = dense_layer(std::move(name), inputs, fan_out, extra);
  l.binary = true;
  l.active = active;
  return l;
}

LayerTrace lif_layer(std::string name, const Tensor& spikes) {
  LayerTrace l;
  l.name = std::move(name);
  l.neurons = spikes.numel();
  l.spikes = nnz(spikes.data());
  return l;
}

}  // namespace

ForecastModel::ForecastModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  init_parameters();
}

void ForecastModel::init_parameters() {
  std::mt19937_64 rng(config_.seed);
  params_.clear();
  for (const auto& spec : param_specs(config_)) {
    std::vector<float> values(shape_numel(spec.shape));
    const std::string& name = spec.name;
    if (name == "embed.nodes") {
      std::normal_distribution<float> dist(0.0f, std::pow(static_cast<float>(config_.embed_dim), -0.25f));
      for (auto& v : values) v = dist(rng);
    } else if (name.rfind("embed.", 0) == 0) {
      std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
      for (auto& v : values) v = dist(rng);
    } else if (name == "lstm.b") {
      const std::size_t h = config_.h_dim;
      for (std::size_t k = h; k < 2 * h; ++k) values[k] = 1.0f;  // forget gate
    } else if (name == "ssa.proj.b" || name == "gate.b") {
      // zero
    } else {
      const std::size_t fan_in = spec.shape[spec.shape.size() - 2];
      const bool spike_input = name == "mssa.w1" || name == "mssa.w2" || name == "lstm.wx" ||
                               name == "ssa.wq" || name == "ssa.wk" || name == "ssa.wv";
      const float bound = (spike_input ? 2.0f : 1.0f) / std::sqrt(static_cast<float>(fan_in));
      std::uniform_real_distribution<float> dist(-bound, bound);
      for (auto& v : values) v = dist(rng);
      if (name == "head.w") {
        const std::size_t rows = spec.shape[1], cols = spec.shape[2];
        for (std::size_t node = 0; node < spec.shape[0]; ++node)
          for (std::size_t l = 0; l < cols; ++l) values[(node * rows + rows - 1) * cols + l] = 0.0f;
      }
    }
    params_.emplace_back(name, Tensor(spec.shape, std::move(values), true));
  }
}

const Tensor* ForecastModel::find(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return &t;
  return nullptr;
}

Tensor& ForecastModel::param(const std::string& name) {
  for (auto& [n, t] : params_)
    if (n == name) return t;
  throw ContractError("model has no parameter '" + name + "' (ablation " + to_string(config_.ablation) + ")");
}

std::size_t ForecastModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [n, t] : params_) total += t.numel();
  return total;
}

Tensor ForecastModel::embed_inputs(const WindowBatch& batch) const {
  const auto& x = batch.inputs;
  if (x.rank() != 3 || x.dim(2) != config_.nodes) {
    throw ContractError("embed_inputs: window " + shape_str(x.shape()) + " does not match " +
                        std::to_string(config_.nodes) + " nodes");
  }
  const std::size_t b = x.dim(0), t = x.dim(1), n = x.dim(2);
  if (batch.calendar.size() != b * t) throw ContractError("embed_inputs: calendar does not cover the window");
  if (uses_minute_of_hour(batch.interval_seconds) != config_.uses_minute()) {
    throw ContractError("embed_inputs: sampling interval " + std::to_string(batch.interval_seconds) +
                        " s differs from the model's");
  }
  std::vector<Tensor> parts = {reshape(x, Shape{b, t, n, 1})};
  auto lookup = [&](const char* table, auto field) {
    std::vector<std::uint32_t> index(b * t * n);
    for (std::size_t k = 0; k < b * t; ++k)
      std::fill_n(index.begin() + static_cast<std::ptrdiff_t>(k * n), n,
                  static_cast<std::uint32_t>(field(batch.calendar[k])));
    parts.push_back(reshape(gather_rows(*find(table), index), Shape{b, t, n, 4}));
  };
  if (config_.uses_minute()) lookup("embed.minute", [](const Calendar& c) { return c.minute; });
  lookup("embed.hour", [](const Calendar& c) { return c.hour; });
  lookup("embed.dow", [](const Calendar& c) { return c.dow; });
  return concat_last(parts);
}

AdaptiveGraph ForecastModel::graph() const {
  NoGradGuard guard;
  return build_graph(*find("embed.nodes"), config_.resolved_lambda(), config_.k1, config_.k2);
}

template <typename T>
BasicTensor<T> prediction_head(const BasicTensor<T>& fused, const BasicTensor<T>& w, std::size_t batch) {
  if (fused.rank() != 2 || w.rank() != 3 || batch == 0 || fused.dim(0) != batch * w.dim(0) ||
      fused.dim(1) + 1 != w.dim(1)) {
    throw DimensionError("prediction_head: features " + shape_str(fused.shape()) + " vs weights " +
                         shape_str(w.shape()));
  }
  const std::size_t n = w.dim(0), h = fused.dim(1);
  auto per_node = swap_axes(reshape(fused, Shape{batch, n, h}), 0, 1);
  auto with_bias = concat_last<T>({per_node, BasicTensor<T>::full(Shape{n, batch, 1}, T(1))});
  return swap_axes(swap_axes(bmm(with_bias, w), 0, 1), 1, 2);
}

Tensor ForecastModel::forward(const WindowBatch& batch, ForwardTrace* trace) const {
  const auto& c = config_;
  if (batch.inputs.rank() != 3 || batch.inputs.dim(1) != c.input_len || batch.inputs.dim(2) != c.nodes) {
    throw ContractError("forward: window " + shape_str(batch.inputs.shape()) + " does not match T=" +
                        std::to_string(c.input_len) + ", N=" + std::to_string(c.nodes));
  }
  const std::size_t b = batch.inputs.dim(0), t = c.input_len, n = c.nodes, f = c.feature_width();
  const std::size_t p = t * c.ts, h = c.h_dim;
  const auto& lif = c.lif;

  Tensor x = embed_inputs(batch);

  const Tensor& e = *find("embed.nodes");
  Tensor a;
  TwoLevelSamples samples;
  {
    OpScope scope("graph");
    a = build_adjacency(e, c.resolved_lambda());
    const auto candidates = prune_neighbors(a);
    const auto importance = node_importance(a);
    samples = sample_two_level(a, candidates, importance, c.k1, c.k2);
  }

  Tensor x_obs;
  {
    OpScope scope("obs");
    x_obs = obs_forward(x, samples.local, ObsWeights<float>{*find("obs.wq"), *find("obs.wk"), *find("obs.wv")}, a);
  }
  Tensor encoded = spike_encode_sequence(x_obs, c.ts, lif);
  MssaOutput<float> m;
  {
    OpScope scope("mssa");
    m = mssa_forward_spikes(encoded, samples, HopWeights<float>{*find("mssa.w1"), *find("mssa.w2")}, lif);
  }
  Tensor spikes = concat_last<float>({m.hop1, m.hop2});

  LstmOutput<float> lstm;
  if (has_lstm(c.ablation)) {
    OpScope scope("lstm");
    lstm = lstm_forward(flatten_substeps(spikes, c.ts),
                        LstmWeights<float>{*find("lstm.wx"), *find("lstm.wh"), *find("lstm.b")});
  }

  Tensor ssa_in, h_ssa;
  SsaOutput<float> ssa;
  if (has_ssa(c.ablation)) {
    OpScope scope("ssa");
    ssa_in = c.ablation == Ablation::W2 ? spikes : spike_encode_sequence(lstm.hidden, c.ts, lif);
    ssa = ssa_forward(ssa_in, SsaWeights<float>{*find("ssa.wq"), *find("ssa.wk"), *find("ssa.wv")}, lif, c.ts);
    auto decoded = reshape(decode_substeps(ssa.out, c.ts), Shape{b * n, c.d_k});
    h_ssa = add_bias(matmul(decoded, *find("ssa.proj.w")), *find("ssa.proj.b"));
  }

  Tensor fused;
  switch (c.ablation) {
    case Ablation::W1: fused = lstm.last; break;
    case Ablation::W2:
    case Ablation::W3: fused = h_ssa; break;
    case Ablation::W4: {
      OpScope scope("gate");
      fused = gate_fuse(lstm.last, h_ssa, GateWeights<float>{*find("gate.w"), *find("gate.b")}).fused;
      break;
    }
  }
  Tensor out;
  {
    OpScope scope("head");
    out = prediction_head(fused, *find("head.w"), b);
  }

  if (trace) {
    auto& layers = trace->layers;
    const std::uint64_t bt = b * t, bp = b * p;
    const auto s1 = total_size(samples.local), s2 = total_size(samples.semi_global);
    layers.push_back(dense_layer("graph.adjacency", n * c.embed_dim, n));
    layers.push_back(dense_layer("obs.qkv", bt * n * f, 3 * f, bt * s1 * 2 * f));
    layers.push_back(lif_layer("lif.encode_obs", encoded));
    layers.push_back(spike_layer("mssa.hop1", bp * s1 * f, gathered_active(encoded, samples.local), c.d1));
    layers.push_back(lif_layer("lif.hop1", m.hop1));
    layers.push_back(spike_layer("mssa.hop2", bp * s2 * c.d1, gathered_active(m.hop1, samples.semi_global), c.d2));
    layers.push_back(lif_layer("lif.hop2", m.hop2));
    if (has_lstm(c.ablation)) {
      layers.push_back(spike_layer("lstm.input", spikes.numel(), nnz(spikes.data()), 4 * h));
      layers.push_back(dense_layer("lstm.recurrent", b * (t - 1) * n * h, 4 * h, bt * n * h * 3));
    }
    if (has_ssa(c.ablation)) {
      if (c.ablation != Ablation::W2) layers.push_back(lif_layer("lif.encode_hidden", ssa_in));
      layers.push_back(spike_layer("ssa.qkv", ssa_in.numel(), nnz(ssa_in.data()), 3 * c.d_k));
      LayerTrace fire = lif_layer("lif.ssa_qkv", ssa.q);
      fire.neurons *= 3;
      fire.spikes += nnz(ssa.k.data()) + nnz(ssa.v.data());
      layers.push_back(fire);
      const std::size_t tail_offset = (p - c.ts) * n * c.d_k;
      std::uint64_t q_tail = 0;
      for (std::size_t bb = 0; bb < b; ++bb)
        q_tail += nnz(ssa.q.data().subspan(bb * p * n * c.d_k + tail_offset, c.ts * n * c.d_k));
      layers.push_back(spike_layer("ssa.scores", b * n * c.ts * c.d_k, q_tail, p, b * n * c.ts * p));
      layers.push_back(spike_layer("ssa.values", ssa.v.numel(), nnz(ssa.v.data()), c.ts));
      layers.push_back(dense_layer("ssa.readout", b * n * c.d_k, h));
    }
    if (has_gate(c.ablation)) layers.push_back(dense_layer("gate", b * n * 2 * h, h, b * n * h * 2));
    layers.push_back(dense_layer("head", b * n * (h + 1), c.horizon));
  }
  return out;
}

std::vector<float> ForecastModel::predict(const WindowBatch& batch) const {
  if (norm_.empty()) throw ContractError("predict: model has no normalisation statistics");
  NoGradGuard guard;
  const Tensor out = forward(batch);
  std::vector<float> values(out.data().begin(), out.data().end());
  invert_zscore(values, norm_);
  return values;
}

namespace {

const char* const kConfigKeys[] = {"nodes", "input_len", "horizon", "embed_dim", "k1",
                                   "k2",    "d1",        "d2",      "h_dim",     "d_k",
                                   "ts",    "beta",      "u_th",    "u_reset",   "alpha",
                                   "lambda", "learning_rate", "epochs", "batch_size", "ablation",
                                   "interval_seconds"};

}  // namespace

std::vector<NamedTensor> ForecastModel::state() const {
  const auto& c = config_;
  const float values[] = {static_cast<float>(c.nodes),     static_cast<float>(c.input_len),
                          static_cast<float>(c.horizon),   static_cast<float>(c.embed_dim),
                          static_cast<float>(c.k1),        static_cast<float>(c.k2),
                          static_cast<float>(c.d1),        static_cast<float>(c.d2),
                          static_cast<float>(c.h_dim),     static_cast<float>(c.d_k),
                          static_cast<float>(c.ts),        c.lif.beta,
                          c.lif.u_th,                      c.lif.u_reset,
                          c.lif.alpha,                     c.resolved_lambda(),
                          c.learning_rate,                 static_cast<float>(c.epochs),
                          static_cast<float>(c.batch_size), static_cast<float>(static_cast<int>(c.ablation)),
                          static_cast<float>(c.interval_seconds)};
  std::vector<NamedTensor> out;
  for (std::size_t k = 0; k < std::size(kConfigKeys); ++k) {
    out.emplace_back(std::string("config.") + kConfigKeys[k], Tensor::scalar(values[k]));
  }
  if (!norm_.empty()) {
    out.emplace_back("norm.mean", Tensor(Shape{norm_.mean.size()}, norm_.mean));
    out.emplace_back("norm.std", Tensor(Shape{norm_.std.size()}, norm_.std));
  }
  for (const auto& [name, t] : params_) out.emplace_back(name, t.detach());
  return out;
}

ForecastModel ForecastModel::from_state(const std::vector<NamedTensor>& tensors) {
  auto get = [&](const std::string& name) -> const Tensor* {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  };
  auto scalar = [&](const char* key) {
    const Tensor* t = get(std::string("config.") + key);
    if (!t || t->numel() != 1) throw ContractError(std::string("checkpoint: missing config.") + key);
    return t->item();
  };
  auto count = [&](const char* key) { return static_cast<std::size_t>(std::lround(scalar(key))); };
  ModelConfig c;
  c.nodes = count("nodes");
  c.input_len = count("input_len");
  c.horizon = count("horizon");
  c.embed_dim = count("embed_dim");
  c.k1 = count("k1");
  c.k2 = count("k2");
  c.d1 = count("d1");
  c.d2 = count("d2");
  c.h_dim = count("h_dim");
  c.d_k = count("d_k");
  c.ts = count("ts");
  c.lif.beta = scalar("beta");
  c.lif.u_th = scalar("u_th");
  c.lif.u_reset = scalar("u_reset");
  c.lif.alpha = scalar("alpha");
  c.lambda = scalar("lambda");
  c.learning_rate = scalar("learning_rate");
  c.epochs = count("epochs");
  c.batch_size = count("batch_size");
  const long ablation = std::lround(scalar("ablation"));
  if (ablation < 1 || ablation > 4) throw ContractError("checkpoint: bad ablation id " + std::to_string(ablation));
  c.ablation = static_cast<Ablation>(ablation);
  c.interval_seconds = std::llround(scalar("interval_seconds"));

  ForecastModel model(c);
  for (auto& [name, param] : model.params_) {
    const Tensor* stored = get(name);
    if (!stored) {
      throw ContractError("checkpoint: ablation " + to_string(c.ablation) + " needs '" + name + "', not stored");
    }
    if (stored->shape() != param.shape()) {
      throw ContractError("checkpoint: '" + name + "' has shape " + shape_str(stored->shape()) + ", expected " +
                          shape_str(param.shape()));
    }
    std::copy(stored->data().begin(), stored->data().end(), param.mutable_data().begin());
  }
  for (const auto& [name, t] : tensors) {
    const bool known = name.rfind("config.", 0) == 0 || name == "norm.mean" || name == "norm.std" ||
                       model.find(name) != nullptr;
    if (!known) {
      throw ContractError("checkpoint: tensor '" + name + "' does not belong to ablation " + to_string(c.ablation));
    }
  }
  const Tensor* mean = get("norm.mean");
  const Tensor* sd = get("norm.std");
  if (mean && sd) {
    if (mean->numel() != c.nodes || sd->numel() != c.nodes) {
      throw ContractError("checkpoint: normalisation statistics do not cover every node");
    }
    model.norm_.mean.assign(mean->data().begin(), mean->data().end());
    model.norm_.std.assign(sd->data().begin(), sd->data().end());
  }
  return model;
}

template Tensor prediction_head(const Tensor&, const Tensor&, std::size_t);
template TensorD prediction_head(const TensorD&, const TensorD&, std::size_t);

}  // namespace spikecast

#include "spikecast/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "spikecast/errors.hpp"
#include "spikecast/metrics.hpp"
#include "spikecast/ops.hpp"

namespace spikecast {

Adam::Adam(std::vector<Tensor> params, float lr, float beta1, float beta2, float eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0f);
    v_.emplace_back(p.numel(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  if (lr_ == 0.0f) return;
  const float c1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
  const float c2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0f - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0f - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (float g : p.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const float factor = static_cast<float>(max_norm / norm);
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      for (auto& g : p.impl()->grad) g *= factor;
    }
  }
  return norm;
}

TrainOptions options_from(const ModelConfig& config) {
  TrainOptions o;
  o.epochs = config.epochs;
  o.batch_size = config.batch_size;
  o.learning_rate = config.learning_rate;
  o.seed = config.seed;
  return o;
}

std::string first_nonfinite(const ForecastModel& model) {
  for (const auto& [name, t] : model.parameters()) {
    for (float v : t.data())
      if (!std::isfinite(v)) return name;
  }
  return {};
}

namespace {

[[noreturn]] void diverged(std::size_t epoch, const std::string& what) {
  throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + what);
}

}  // namespace

EvalResult evaluate(const ForecastModel& model, const SeriesDataset& ds, const std::vector<std::size_t>& starts,
                    std::size_t batch_size) {
  const auto& c = model.config();
  if (model.norm().empty()) throw ContractError("evaluate: model has no normalisation statistics");
  EvalResult out;
  if (starts.empty()) {
    out.r2 = out.rse = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const auto normalized = apply_zscore(ds, model.norm());
  batch_size = std::max<std::size_t>(1, batch_size);
  for (std::size_t first = 0; first < starts.size(); first += batch_size) {
    const std::vector<std::size_t> chunk(starts.begin() + static_cast<std::ptrdiff_t>(first),
                                         starts.begin() + static_cast<std::ptrdiff_t>(std::min(starts.size(), first + batch_size)));
    const auto batch = gather_windows(ds, normalized, model.norm(), chunk, c.input_len, c.horizon);
    const auto pred = model.predict(batch);
    out.pred.insert(out.pred.end(), pred.begin(), pred.end());
    std::vector<float> target(batch.targets.data().begin(), batch.targets.data().end());
    invert_zscore(target, model.norm());
    out.target.insert(out.target.end(), target.begin(), target.end());
  }
  try {
    out.r2 = metric_r2(std::span<const float>(out.pred), std::span<const float>(out.target));
    out.rse = metric_rse(std::span<const float>(out.pred), std::span<const float>(out.target));
  } catch (const UndefinedMetricError&) {
    out.r2 = out.rse = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

TrainReport train(ForecastModel& model, const SeriesDataset& ds, const WindowSplits& splits,
                  const TrainOptions& options) {
  const auto& c = model.config();
  if (ds.nodes() != c.nodes) {
    throw ContractError("train: dataset has " + std::to_string(ds.nodes()) + " nodes, model expects " +
                        std::to_string(c.nodes));
  }
  if (splits.train.empty()) throw ContractError("train: no training windows");
  if (model.norm().empty()) model.set_norm(fit_zscore(ds, 0, splits.train_end));
  const auto normalized = apply_zscore(ds, model.norm());

  std::vector<Tensor> params;
  for (auto& [name, t] : model.parameters()) params.push_back(t);
  Adam adam(params, options.learning_rate);
  std::mt19937_64 rng(options.seed ^ 0x5851f42d4c957f2dULL);

  TrainReport report;
  std::vector<std::vector<float>> best;
  report.best_val_r2 = -std::numeric_limits<double>::infinity();
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order = splits.train;
  const std::size_t bs = std::max<std::size_t>(1, options.batch_size);
  bool stop = false;

  for (std::size_t epoch = 1; epoch <= options.epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += bs) {
      const std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(first),
                                           order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), first + bs)));
      const auto batch = gather_windows(ds, normalized, model.norm(), chunk, c.input_len, c.horizon);
      if (auto bad = first_nonfinite(model); !bad.empty()) diverged(epoch, "parameter '" + bad + "' is non-finite");
      adam.zero_grad();
      auto loss = mse_loss(model.forward(batch), batch.targets);
      const float value = loss.item();
      if (!std::isfinite(value)) {
        const auto bad = first_nonfinite(model);
        diverged(epoch, "loss is " + std::to_string(value) +
                            (bad.empty() ? std::string() : "; parameter '" + bad + "' is non-finite"));
      }
      loss.backward();
      clip_grad_norm(params, options.clip_norm);
      adam.step();
      if (auto bad = first_nonfinite(model); !bad.empty()) diverged(epoch, "parameter '" + bad + "' is non-finite");
      loss_sum += value;
      ++batches;
      ++report.steps;
      if (options.max_steps && report.steps >= options.max_steps) {
        stop = true;
        break;
      }
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, batches));
    const auto val = evaluate(model, ds, splits.val);
    log.val_r2 = val.r2;
    log.val_rse = val.rse;
    report.epochs.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
    // NaN validation (constant or empty split) keeps the most recent epoch.
    const bool better = std::isnan(val.r2) || val.r2 > report.best_val_r2;
    if (better) {
      report.best_val_r2 = val.r2;
      report.best_epoch = epoch;
      best.clear();
      for (const auto& [name, t] : model.parameters()) best.emplace_back(t.data().begin(), t.data().end());
    }
  }
  if (options.restore_best && !best.empty()) {
    auto& ps = model.parameters();
    for (std::size_t k = 0; k < ps.size(); ++k) std::copy(best[k].begin(), best[k].end(), ps[k].second.mutable_data().begin());
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace spikecast

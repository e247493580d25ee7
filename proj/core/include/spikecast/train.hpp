#pragma once

// Mini-batch training with Adam and global gradient-norm clipping on the
// MSE of z-scored targets. Validation metrics are computed on de-normalised
// values; the parameters of the best validation epoch are kept.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "spikecast/dataset.hpp"
#include "spikecast/model.hpp"

namespace spikecast {

class Adam {
 public:
  Adam(std::vector<Tensor> params, float lr, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f);
  /// Applies one update from the accumulated gradients. Parameters without a
  /// gradient are left untouched.
  void step();
  void zero_grad();
  void set_learning_rate(float lr) { lr_ = lr; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<float>> m_, v_;
  float lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
};

/// Scales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;     // mean training MSE (normalised units)
  double val_r2 = 0.0;   // NaN when the validation target is constant or empty
  double val_rse = 0.0;
};

struct TrainOptions {
  std::size_t epochs = 8;
  std::size_t batch_size = 32;
  float learning_rate = 1e-3f;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
  bool restore_best = true;
  std::size_t max_steps = 0;  // 0: no limit
  std::function<void(const EpochLog&)> on_epoch;
};

TrainOptions options_from(const ModelConfig& config);

struct TrainReport {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_r2 = 0.0;
  std::size_t steps = 0;
  double seconds = 0.0;
};

/// Fits normalisation stats on the training segment when the model has none.
/// Throws DivergenceError naming the first non-finite parameter (or the loss).
TrainReport train(ForecastModel& model, const SeriesDataset& ds, const WindowSplits& splits,
                  const TrainOptions& options);

struct EvalResult {
  double r2 = 0.0;
  double rse = 0.0;
  std::vector<float> pred;    // de-normalised, (windows, L, N)
  std::vector<float> target;  // same layout
};

EvalResult evaluate(const ForecastModel& model, const SeriesDataset& ds, const std::vector<std::size_t>& starts,
                    std::size_t batch_size = 64);

/// Name of the first parameter holding a non-finite value, or "".
std::string first_nonfinite(const ForecastModel& model);

}  // namespace spikecast

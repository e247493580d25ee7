#include <benchmark/benchmark.h>

#include "spikecast/dataset.hpp"
#include "spikecast/model.hpp"
#include "spikecast/ops.hpp"
#include "spikecast/synthetic.hpp"
#include "spikecast/train.hpp"

using namespace spikecast;

namespace {

struct Setup {
  ForecastModel model;
  WindowBatch batch;
};

Setup make_setup(Ablation a, std::size_t ts) {
  ModelConfig c;
  c.ablation = a;
  c.ts = ts;
  auto ds = synth_generate(c.nodes, 600, 1);
  auto splits = make_windows(ds, c.input_len, c.horizon, 1);
  ForecastModel model(c);
  auto stats = fit_zscore(ds, 0, splits.train_end);
  model.set_norm(stats);
  std::vector<std::size_t> starts(splits.train.begin(), splits.train.begin() + static_cast<std::ptrdiff_t>(c.batch_size));
  auto batch = gather_windows(ds, apply_zscore(ds, stats), stats, starts, c.input_len, c.horizon);
  return {std::move(model), std::move(batch)};
}

// One forward, backward and Adam update on a default-size batch.
void BM_TrainStep(benchmark::State& state) {
  auto s = make_setup(static_cast<Ablation>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  std::vector<Tensor> params;
  for (auto& [name, t] : s.model.parameters()) params.push_back(t);
  Adam adam(params, 1e-3f);
  for (auto _ : state) {
    adam.zero_grad();
    auto loss = mse_loss(s.model.forward(s.batch), s.batch.targets);
    loss.backward();
    clip_grad_norm(params, 1.0);
    adam.step();
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.batch.size()));
}

void BM_Forward(benchmark::State& state) {
  auto s = make_setup(Ablation::W4, static_cast<std::size_t>(state.range(0)));
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(s.model.forward(s.batch));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.batch.size()));
}

}  // namespace

BENCHMARK(BM_TrainStep)->Args({1, 4})->Args({4, 4})->Args({4, 8})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forward)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

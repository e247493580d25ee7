#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "spikecast/dataset.hpp"
#include "spikecast/model.hpp"
#include "spikecast/train.hpp"

namespace spikecast::cli {

struct RunConfig {
  ModelConfig model;
  std::string data = "synthetic";
  std::size_t synth_steps = 2000;
  std::size_t stride = 1;
  std::string out_dir = "run";
  std::string checkpoint;
  std::string split = "test";
  std::string forecast_path;
  std::size_t seeds = 3;
  std::vector<std::size_t> ts_values = {4, 8, 12, 16};
  double e_mac_pj = 4.6;
  double e_ac_pj = 0.9;
  bool quiet = false;
  std::string config_file;
};

/// synthetic: synth_generate(nodes, synth_steps, seed). Otherwise a CSV whose
/// node count and sampling interval overwrite the model config.
SeriesDataset load_dataset(RunConfig& config);

struct RunResult {
  ForecastModel model;
  TrainReport report;
  EvalResult test;
};

/// Train on the train split and score the test split. No files written.
RunResult train_and_test(const RunConfig& config, const SeriesDataset& ds, std::ostream* log = nullptr);

struct VariantScore {
  Ablation ablation = Ablation::W4;
  std::vector<double> r2;   // one per seed
  std::vector<double> rse;
  double median_r2 = 0.0;
  double median_rse = 0.0;
};

double median(std::vector<double> values);

/// Ablation table: one row per variant with median R2 / RSE; the row with
/// the highest median R2 is marked with '*'.
std::string ablation_table(const std::vector<VariantScore>& rows);

struct SweepRow {
  std::size_t ts = 0;
  double r2 = 0.0;
  double rse = 0.0;
};

std::string sweep_table(const std::vector<SweepRow>& rows);
double sweep_stability(const std::vector<SweepRow>& rows);

int cmd_train(RunConfig config, std::ostream& out);
int cmd_eval(RunConfig config, std::ostream& out);
int cmd_predict(RunConfig config, std::ostream& out);
int cmd_ablate(RunConfig config, std::ostream& out);
int cmd_sweep_ts(RunConfig config, std::ostream& out);
int cmd_energy(RunConfig config, std::ostream& out);

}  // namespace spikecast::cli

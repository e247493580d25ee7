#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "spikecast/checkpoint.hpp"
#include "spikecast/energy.hpp"
#include "spikecast/errors.hpp"
#include "spikecast/synthetic.hpp"

namespace spikecast::cli {

namespace fs = std::filesystem;

SeriesDataset load_dataset(RunConfig& config) {
  if (config.data == "synthetic") {
    return synth_generate(config.model.nodes, config.synth_steps, config.model.seed);
  }
  auto ds = load_csv(config.data);
  config.model.nodes = ds.nodes();
  config.model.interval_seconds = ds.interval_seconds;
  return ds;
}

RunResult train_and_test(const RunConfig& config, const SeriesDataset& ds, std::ostream* log) {
  ModelConfig mc = config.model;
  mc.interval_seconds = ds.interval_seconds;
  const auto splits = make_windows(ds, mc.input_len, mc.horizon, config.stride);
  ForecastModel model(mc);
  auto options = options_from(mc);
  if (log) {
    options.on_epoch = [log](const EpochLog& e) {
      *log << "epoch " << e.epoch << "  loss " << std::setprecision(5) << e.loss << "  val_r2 " << e.val_r2
           << "  val_rse " << e.val_rse << std::endl;
    };
  }
  auto report = train(model, ds, splits, options);
  auto test = evaluate(model, ds, splits.test);
  return {std::move(model), std::move(report), std::move(test)};
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::string ablation_table(const std::vector<VariantScore>& rows) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (rows[k].median_r2 > rows[best].median_r2) best = k;
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %10s %10s\n", "Variant", "R2", "RSE");
  os << line;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::snprintf(line, sizeof line, "%-8s %10.4f %10.4f%s\n", to_string(rows[k].ablation).c_str(),
                  rows[k].median_r2, rows[k].median_rse, k == best ? "  *" : "");
    os << line;
  }
  return os.str();
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-4s %10s %10s\n", "Ts", "R2", "RSE");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-4zu %10.4f %10.4f\n", r.ts, r.r2, r.rse);
    os << line;
  }
  std::snprintf(line, sizeof line, "stability (max-min R2): %.4f\n", sweep_stability(rows));
  os << line;
  return os.str();
}

double sweep_stability(const std::vector<SweepRow>& rows) {
  if (rows.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                            [](const SweepRow& a, const SweepRow& b) { return a.r2 < b.r2; });
  return hi->r2 - lo->r2;
}

namespace {

void prepare_out(const RunConfig& config) { fs::create_directories(config.out_dir); }

std::string out_path(const RunConfig& config, const char* name) { return (fs::path(config.out_dir) / name).string(); }

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << std::setprecision(9);
  return f;
}

// Loads the checkpoint named by --checkpoint and the dataset it applies to.
std::pair<ForecastModel, SeriesDataset> load_trained(RunConfig& config) {
  if (config.checkpoint.empty()) throw ContractError("--checkpoint is required");
  auto model = load_model(config.checkpoint);
  config.model.nodes = model.config().nodes;
  auto ds = load_dataset(config);
  if (ds.nodes() != model.config().nodes) {
    throw ContractError("dataset has " + std::to_string(ds.nodes()) + " nodes, checkpoint expects " +
                        std::to_string(model.config().nodes));
  }
  return {std::move(model), std::move(ds)};
}

std::vector<std::size_t> split_starts(const WindowSplits& s, const std::string& which) {
  if (which == "train") return s.train;
  if (which == "val") return s.val;
  if (which == "test") return s.test;
  throw ContractError("unknown split '" + which + "' (train, val or test)");
}

}  // namespace

int cmd_train(RunConfig config, std::ostream& out) {
  auto ds = load_dataset(config);
  prepare_out(config);
  auto result = train_and_test(config, ds, config.quiet ? nullptr : &out);

  save_model(out_path(config, "checkpoint.stag"), result.model);
  auto metrics = open_out(out_path(config, "metrics.csv"));
  metrics << "epoch,loss,r2,rse\n";
  for (const auto& e : result.report.epochs) metrics << e.epoch << ',' << e.loss << ',' << e.val_r2 << ',' << e.val_rse << '\n';
  auto summary = open_out(out_path(config, "summary.txt"));
  summary << "ablation: " << to_string(config.model.ablation) << '\n'
          << "best_epoch: " << result.report.best_epoch << '\n'
          << "test_r2: " << result.test.r2 << '\n'
          << "test_rse: " << result.test.rse << '\n';
  out << "test R2 " << result.test.r2 << "  RSE " << result.test.rse << "  (" << std::fixed << std::setprecision(1)
      << result.report.seconds << " s)\n";
  return 0;
}

int cmd_eval(RunConfig config, std::ostream& out) {
  auto [model, ds] = load_trained(config);
  const auto& c = model.config();
  const auto splits = make_windows(ds, c.input_len, c.horizon, config.stride);
  const auto result = evaluate(model, ds, split_starts(splits, config.split));
  out << std::setprecision(9) << "split: " << config.split << "\nr2: " << result.r2 << "\nrse: " << result.rse << '\n';
  return 0;
}

int cmd_predict(RunConfig config, std::ostream& out) {
  auto [model, ds] = load_trained(config);
  const auto& c = model.config();
  const auto batch = latest_window(ds, model.norm(), c.input_len, c.horizon);
  const auto forecast = model.predict(batch);
  std::string path = config.forecast_path.empty() ? out_path(config, "forecast.csv") : config.forecast_path;
  if (config.forecast_path.empty()) prepare_out(config);
  auto f = open_out(path);
  f << "timestamp";
  for (const auto& name : ds.node_names) f << ',' << name;
  f << '\n';
  const std::int64_t last = ds.timestamps.back();
  for (std::size_t l = 0; l < c.horizon; ++l) {
    f << format_timestamp(last + static_cast<std::int64_t>(l + 1) * ds.interval_seconds);
    for (std::size_t i = 0; i < c.nodes; ++i) f << ',' << forecast[l * c.nodes + i];
    f << '\n';
  }
  out << "wrote " << c.horizon << " forecast rows to " << path << '\n';
  return 0;
}

int cmd_ablate(RunConfig config, std::ostream& out) {
  prepare_out(config);
  std::vector<VariantScore> rows;
  for (auto variant : {Ablation::W1, Ablation::W2, Ablation::W3, Ablation::W4}) {
    VariantScore row;
    row.ablation = variant;
    for (std::size_t s = 0; s < config.seeds; ++s) {
      RunConfig run = config;
      run.model.ablation = variant;
      run.model.seed = config.model.seed + s;
      auto ds = load_dataset(run);
      const auto result = train_and_test(run, ds);
      row.r2.push_back(result.test.r2);
      row.rse.push_back(result.test.rse);
      if (!config.quiet) {
        out << to_string(variant) << " seed " << run.model.seed << ": R2 " << result.test.r2 << "  RSE "
            << result.test.rse << std::endl;
      }
    }
    row.median_r2 = median(row.r2);
    row.median_rse = median(row.rse);
    rows.push_back(std::move(row));
  }
  const std::string table = ablation_table(rows);
  out << table;
  auto f = open_out(out_path(config, "ablation.csv"));
  f << "variant,r2,rse\n";
  for (const auto& r : rows) f << to_string(r.ablation) << ',' << r.median_r2 << ',' << r.median_rse << '\n';
  open_out(out_path(config, "ablation.txt")) << table;
  return 0;
}

int cmd_sweep_ts(RunConfig config, std::ostream& out) {
  prepare_out(config);
  auto ds = load_dataset(config);
  std::vector<SweepRow> rows;
  for (auto ts : config.ts_values) {
    RunConfig run = config;
    run.model.ts = ts;
    const auto result = train_and_test(run, ds);
    rows.push_back({ts, result.test.r2, result.test.rse});
    if (!config.quiet) out << "Ts " << ts << ": R2 " << result.test.r2 << "  RSE " << result.test.rse << std::endl;
  }
  const std::string table = sweep_table(rows);
  out << table;
  auto f = open_out(out_path(config, "sweep_ts.csv"));
  f << "ts,r2,rse\n";
  for (const auto& r : rows) f << r.ts << ',' << r.r2 << ',' << r.rse << '\n';
  return 0;
}

int cmd_energy(RunConfig config, std::ostream& out) {
  auto [model, ds] = load_trained(config);
  const auto& c = model.config();
  const auto splits = make_windows(ds, c.input_len, c.horizon, config.stride);
  if (splits.test.empty()) throw ContractError("energy: no test windows");
  const std::size_t take = std::min(splits.test.size(), config.model.batch_size);
  const std::vector<std::size_t> starts(splits.test.begin(), splits.test.begin() + static_cast<std::ptrdiff_t>(take));
  const auto batch = gather_windows(ds, apply_zscore(ds, model.norm()), model.norm(), starts, c.input_len, c.horizon);
  const auto ops = count_ops(model, batch);
  const auto report = estimate_energy(ops.spiking, ops.twin, config.e_mac_pj, config.e_ac_pj);
  const double r2 = evaluate(model, ds, splits.test).r2;

  prepare_out(config);
  auto text = open_out(out_path(config, "energy_report.txt"));
  text << "batch_windows: " << take << '\n';
  write_energy_report(text, report, r2);
  auto csv = open_out(out_path(config, "energy_layers.csv"));
  write_energy_csv(csv, report);
  out << energy_table(report, r2);
  return 0;
}

}  // namespace spikecast::cli

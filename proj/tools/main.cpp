#include <filesystem>
#include <fstream>
#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "commands.hpp"
#include "spikecast/model.hpp"

using spikecast::cli::RunConfig;

namespace {

struct Flags {
  std::string lambda = "auto";
  std::string ablation = "W4";
};

void add_model_options(CLI::App* cmd, RunConfig& c, Flags& f) {
  auto& m = c.model;
  cmd->add_option("--data", c.data, "CSV path or 'synthetic'");
  cmd->add_option("--synth-steps", c.synth_steps, "Length of the synthetic series");
  cmd->add_option("--nodes", m.nodes, "Node count (synthetic data)");
  cmd->add_option("--input-len", m.input_len, "Input window T");
  cmd->add_option("--horizon", m.horizon, "Forecast horizon L");
  cmd->add_option("--embed-dim", m.embed_dim, "Node embedding width d");
  cmd->add_option("--k1", m.k1, "Local sample budget");
  cmd->add_option("--k2", m.k2, "Semi-global sample budget");
  cmd->add_option("--d1", m.d1, "Hop-1 width");
  cmd->add_option("--d2", m.d2, "Hop-2 width");
  cmd->add_option("--hidden", m.h_dim, "LSTM / fusion width");
  cmd->add_option("--dk", m.d_k, "SSA key width");
  cmd->add_option("--ts", m.ts, "Spike sub-steps per series step");
  cmd->add_option("--beta", m.lif.beta, "LIF decay");
  cmd->add_option("--u-th", m.lif.u_th, "LIF threshold");
  cmd->add_option("--u-reset", m.lif.u_reset, "LIF reset potential");
  cmd->add_option("--alpha", m.lif.alpha, "Surrogate sharpness");
  cmd->add_option("--lambda", f.lambda, "Self-loop weight, or 'auto' for nodes - 1");
  cmd->add_option("--lr", m.learning_rate, "Adam learning rate");
  cmd->add_option("--epochs", m.epochs, "Training epochs");
  cmd->add_option("--batch-size", m.batch_size, "Mini-batch size");
  cmd->add_option("--seed", m.seed, "Random seed");
  cmd->add_option("--ablation", f.ablation, "W1, W2, W3 or W4");
  cmd->add_option("--stride", c.stride, "Window stride");
  cmd->add_option("--out", c.out_dir, "Output directory");
  cmd->add_flag("--quiet", c.quiet, "Suppress per-epoch output");
  cmd->add_option("--config", c.config_file, "key=value file; flags override it");
}

void add_checkpoint_option(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--checkpoint", c.checkpoint, "Checkpoint file");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Values from the config file fill every option not given on the command line.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(row) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    auto* opt = key == "config" ? nullptr : cmd->get_option_no_throw("--" + key);
    if (!opt) throw std::runtime_error("unknown config key '" + key + "' in " + path);
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void finish_flags(RunConfig& c, const Flags& f) {
  c.model.ablation = spikecast::parse_ablation(f.ablation);
  if (f.lambda == "auto") {
    c.model.lambda.reset();
  } else {
    c.model.lambda = std::stof(f.lambda);
  }
}

void echo_config(const CLI::App* cmd, const RunConfig& c) {
  std::filesystem::create_directories(c.out_dir);
  std::ofstream out(std::filesystem::path(c.out_dir) / "config.ini");
  for (const auto* opt : cmd->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    std::string value = opt->get_default_str();
    if (opt->count()) {
      value.clear();
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    }
    out << name << '=' << value << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Spiking spatio-temporal graph forecaster"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  RunConfig config;
  Flags flags;

  auto* train = app.add_subcommand("train", "Train a model, write checkpoint and metrics");
  add_model_options(train, config, flags);

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a data split");
  add_model_options(eval, config, flags);
  add_checkpoint_option(eval, config);
  eval->add_option("--split", config.split, "train, val or test");

  auto* predict = app.add_subcommand("predict", "Forecast the L steps after the end of the data");
  add_model_options(predict, config, flags);
  add_checkpoint_option(predict, config);
  predict->add_option("--output", config.forecast_path, "Forecast CSV (default <out>/forecast.csv)");

  auto* ablate = app.add_subcommand("ablate", "Train W1-W4 over several seeds");
  add_model_options(ablate, config, flags);
  ablate->add_option("--seeds", config.seeds, "Seeds per variant (seed, seed+1, ...)");

  auto* sweep = app.add_subcommand("sweep-ts", "Train one model per Ts value");
  add_model_options(sweep, config, flags);
  sweep->add_option("--ts-values", config.ts_values, "Comma-separated Ts values")->delimiter(',');

  auto* energy = app.add_subcommand("energy", "Theoretical energy versus a dense twin");
  add_model_options(energy, config, flags);
  add_checkpoint_option(energy, config);
  energy->add_option("--e-mac", config.e_mac_pj, "Energy per MAC (pJ)");
  energy->add_option("--e-ac", config.e_ac_pj, "Energy per AC (pJ)");

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto* cmd : app.get_subcommands()) {
      if (!config.config_file.empty()) apply_config_file(cmd, config.config_file);
    }
    finish_flags(config, flags);
    namespace sc = spikecast::cli;
    if (train->parsed()) {
      echo_config(train, config);
      return sc::cmd_train(config, std::cout);
    }
    if (eval->parsed()) return sc::cmd_eval(config, std::cout);
    if (predict->parsed()) return sc::cmd_predict(config, std::cout);
    if (ablate->parsed()) {
      echo_config(ablate, config);
      return sc::cmd_ablate(config, std::cout);
    }
    if (sweep->parsed()) {
      echo_config(sweep, config);
      return sc::cmd_sweep_ts(config, std::cout);
    }
    if (energy->parsed()) return sc::cmd_energy(config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "spikecast/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace spikecast;

namespace {

const std::string kTiny =
    " --nodes 4 --input-len 8 --horizon 2 --embed-dim 4 --d1 6 --d2 6 --hidden 8 --dk 6 --ts 2"
    " --epochs 1 --batch-size 16 --synth-steps 200 --quiet";

struct Run {
  int status = 0;
  std::string output;
};

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("spikecast_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run run(const std::string& args, const fs::path& dir) {
  const auto log = dir / "stdout.txt";
  const std::string cmd = std::string(SPIKECAST_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  Run r;
  const int raw = std::system(cmd.c_str());
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  r.output.assign(std::istreambuf_iterator<char>(in), {});
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST(CliTables, MedianAndAblationLayout) {
  EXPECT_EQ(cli::median({3, 1, 2}), 2);
  EXPECT_EQ(cli::median({4, 1, 2, 3}), 2.5);
  std::vector<cli::VariantScore> rows;
  for (int v = 1; v <= 4; ++v) {
    cli::VariantScore s;
    s.ablation = static_cast<Ablation>(v);
    s.median_r2 = v == 4 ? 0.9 : 0.5 + 0.1 * v;
    s.median_rse = 0.3;
    rows.push_back(s);
  }
  const auto table = cli::ablation_table(rows);
  std::istringstream in(table);
  std::string line;
  std::size_t variant_rows = 0;
  while (std::getline(in, line)) {
    if (line.rfind("W", 0) != 0) continue;
    ++variant_rows;
    const bool flagged = line.find('*') != std::string::npos;
    EXPECT_EQ(flagged, line.rfind("W4", 0) == 0) << line;
  }
  EXPECT_EQ(variant_rows, 4u);
  EXPECT_NE(table.find("R2"), std::string::npos);
  EXPECT_NE(table.find("RSE"), std::string::npos);
}

TEST(CliTables, SweepStability) {
  std::vector<cli::SweepRow> rows{{4, 0.9, 0.3}, {8, 0.88, 0.3}, {12, 0.93, 0.2}, {16, 0.91, 0.3}};
  EXPECT_NEAR(cli::sweep_stability(rows), 0.05, 1e-12);
  const auto table = cli::sweep_table(rows);
  EXPECT_NE(table.find("stability"), std::string::npos);
  for (const char* ts : {"4", "8", "12", "16"}) EXPECT_NE(table.find(ts), std::string::npos);
}

TEST(Cli, TrainWritesArtifactsDeterministically) {
  auto a = scratch("train_a"), b = scratch("train_b");
  auto ra = run("train --seed 1 --out " + a.string() + kTiny, a);
  ASSERT_EQ(ra.status, 0) << ra.output;
  for (const char* f : {"checkpoint.stag", "metrics.csv", "summary.txt", "config.ini"}) EXPECT_TRUE(fs::exists(a / f)) << f;
  EXPECT_EQ(slurp(a / "metrics.csv").rfind("epoch,loss,r2,rse\n", 0), 0u);
  EXPECT_NE(slurp(a / "summary.txt").find("test_r2"), std::string::npos);
  EXPECT_NE(slurp(a / "config.ini").find("seed=1"), std::string::npos);

  auto rb = run("train --seed 1 --out " + b.string() + kTiny, b);
  ASSERT_EQ(rb.status, 0) << rb.output;
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "checkpoint.stag"), slurp(b / "checkpoint.stag"));
}

TEST(Cli, W1CheckpointHasNoSsaTensors) {
  auto d = scratch("w1");
  ASSERT_EQ(run("train --ablation W1 --out " + d.string() + kTiny, d).status, 0);
  for (const auto& [name, t] : load_tensors((d / "checkpoint.stag").string())) {
    EXPECT_NE(name.rfind("ssa.", 0), 0u) << name;
    EXPECT_NE(name.rfind("gate.", 0), 0u) << name;
  }
}

TEST(Cli, UnknownConfigKeyRejected) {
  auto d = scratch("badkey");
  std::ofstream(d / "run.ini") << "epochs=1\nbogus_key=3\n";
  auto r = run("train --config " + (d / "run.ini").string() + " --out " + d.string() + kTiny, d);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("bogus_key"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(d / "checkpoint.stag"));
}

TEST(Cli, ConfigFileAppliesAndFlagsOverride) {
  auto d = scratch("cfgfile");
  std::ofstream(d / "run.ini") << "# tiny run\nk1=3\nseed=5\n";
  auto r = run("train --config " + (d / "run.ini").string() + " --seed 2 --out " + d.string() + kTiny, d);
  ASSERT_EQ(r.status, 0) << r.output;
  const auto echoed = slurp(d / "config.ini");
  EXPECT_NE(echoed.find("k1=3"), std::string::npos) << echoed;
  EXPECT_NE(echoed.find("seed=2"), std::string::npos) << echoed;
}

TEST(Cli, BadFlagValueFails) {
  auto d = scratch("badflag");
  EXPECT_NE(run("train --ablation W9 --out " + d.string() + kTiny, d).status, 0);
  EXPECT_NE(run("frobnicate", d).status, 0);
}

TEST(Cli, EvalPredictEnergy) {
  auto d = scratch("eval");
  ASSERT_EQ(run("train --out " + d.string() + kTiny, d).status, 0);
  const std::string ckpt = " --checkpoint " + (d / "checkpoint.stag").string();

  auto e1 = run("eval" + ckpt + " --split val --out " + d.string() + kTiny, d);
  auto e2 = run("eval" + ckpt + " --split val --out " + d.string() + kTiny, d);
  ASSERT_EQ(e1.status, 0) << e1.output;
  EXPECT_NE(e1.output.find("r2:"), std::string::npos);
  EXPECT_EQ(e1.output, e2.output);

  auto p = run("predict" + ckpt + " --out " + d.string() + kTiny, d);
  ASSERT_EQ(p.status, 0) << p.output;
  const auto forecast = slurp(d / "forecast.csv");
  EXPECT_EQ(count_lines(forecast), 1u + 2u);
  EXPECT_EQ(forecast.rfind("timestamp,", 0), 0u);

  auto en = run("energy" + ckpt + " --out " + d.string() + kTiny, d);
  ASSERT_EQ(en.status, 0) << en.output;
  const auto report = slurp(d / "energy_report.txt");
  EXPECT_NE(report.find("params_m: "), std::string::npos);
  const auto pos = report.find("reduction_pct: ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_GT(std::stod(report.substr(pos + 15)), 0.0);
  EXPECT_TRUE(fs::exists(d / "energy_layers.csv"));
  auto en2 = run("energy" + ckpt + " --out " + d.string() + kTiny, d);
  EXPECT_EQ(en.output, en2.output);
  EXPECT_EQ(report, slurp(d / "energy_report.txt"));
}

TEST(Cli, CorruptCheckpointFails) {
  auto d = scratch("corrupt");
  std::ofstream(d / "bad.stag", std::ios::binary) << "JUNKJUNKJUNK";
  auto r = run("eval --checkpoint " + (d / "bad.stag").string() + " --out " + d.string() + kTiny, d);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("error"), std::string::npos) << r.output;
  EXPECT_NE(run("eval --out " + d.string() + kTiny, d).status, 0);
}

TEST(Cli, OverfitRunScoresWellOnTrainingData) {
  auto d = scratch("overfit");
  const std::string args =
      " --nodes 4 --input-len 16 --horizon 1 --embed-dim 4 --d1 8 --d2 8 --hidden 16 --dk 8 --ts 2"
      " --epochs 6 --batch-size 16 --synth-steps 400 --lr 3e-3 --quiet --out " + d.string();
  ASSERT_EQ(run("train" + args, d).status, 0);
  auto e = run("eval --checkpoint " + (d / "checkpoint.stag").string() + " --split train" + args, d);
  ASSERT_EQ(e.status, 0) << e.output;
  const auto pos = e.output.find("r2: ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_GT(std::stod(e.output.substr(pos + 4)), 0.95) << e.output;
}

TEST(Cli, AblateAndSweepTables) {
  auto d = scratch("ablate");
  auto a = run("ablate --seeds 1 --out " + d.string() + kTiny, d);
  ASSERT_EQ(a.status, 0) << a.output;
  EXPECT_EQ(count_lines(slurp(d / "ablation.csv")), 5u);
  EXPECT_NE(slurp(d / "ablation.txt").find('*'), std::string::npos);
  auto s = run("sweep-ts --ts-values 1,2,3,4 --out " + d.string() + kTiny, d);
  ASSERT_EQ(s.status, 0) << s.output;
  EXPECT_EQ(count_lines(slurp(d / "sweep_ts.csv")), 5u);
  EXPECT_NE(s.output.find("stability"), std::string::npos);
}

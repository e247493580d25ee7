// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Training runs are shared between the
// learnability, ablation, Ts, energy and serialization checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "commands.hpp"
#include "spikecast/checkpoint.hpp"
#include "spikecast/dsf.hpp"
#include "spikecast/energy.hpp"
#include "spikecast/grad_check.hpp"
#include "spikecast/graph.hpp"
#include "spikecast/metrics.hpp"
#include "spikecast/mssa.hpp"
#include "spikecast/obs.hpp"
#include "spikecast/ops.hpp"
#include "spikecast/spiking.hpp"

using namespace spikecast;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int g_failures = 0;

void verdict(const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++g_failures;
  std::cout << (pass ? "PASS " : "FAIL ") << name << "  " << detail << std::endl;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

TensorD rand_d(std::mt19937_64& rng, Shape shape, double lo = -1, double hi = 1, bool grad = false) {
  const auto n = shape_numel(shape);
  return TensorD(std::move(shape), uniform(rng, n, lo, hi), grad);
}

TensorD with_grad(const TensorD& t) {
  return TensorD(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true);
}

// ---------------------------------------------------------------------------

void oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double max_diff = 0.0;
  std::size_t spike_mismatches = 0, nodes_checked = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 32)(rng);
    const std::size_t f = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
    const double density = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    std::bernoulli_distribution fire(density), pick(0.3);
    std::vector<float> xv(n * f), wv(f * d);
    for (auto& x : xv) x = fire(rng) ? 1.f : 0.f;
    std::uniform_real_distribution<float> wd(-1.f, 1.f);
    for (auto& w : wv) w = wd(rng);
    const Tensor x({n, f}, xv), w({f, d}, wv);

    NeighborSets sets(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && pick(rng)) sets[i].push_back(static_cast<std::uint32_t>(j));
    const Tensor mask({n, n}, neighbor_mask(sets, n));

    const auto dense = dense_oracle_aggregate(x, mask, w);
    std::vector<float> indexed(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = index_mask_aggregate(x, sets[i], w);
      for (std::size_t k = 0; k < d; ++k) {
        indexed[i * d + k] = row[k];
        max_diff = std::max(max_diff, std::abs(static_cast<double>(row[k]) - dense[i * d + k]));
      }
    }
    std::vector<float> hv(n * d);
    std::uniform_real_distribution<float> hd(0.f, 0.5f);
    for (auto& h : hv) h = hd(rng);
    const Tensor h_prev({n, d}, hv);
    const LifParams lif;
    const auto s_index = lif_step(lif, h_prev, Tensor({n, d}, indexed)).spike;
    const auto s_dense = lif_step(lif, h_prev, dense).spike;
    for (std::size_t p = 0; p < n * d; ++p)
      if (std::memcmp(&s_index.data()[p], &s_dense.data()[p], sizeof(float)) != 0) ++spike_mismatches;
    nodes_checked += n;
  }
  const double secs = seconds_since(t0);
  verdict("oracle_equivalence", max_diff < 1e-6 && spike_mismatches == 0 && secs < 10.0,
          "instances=1000 nodes=" + std::to_string(nodes_checked) + " max_abs_diff=" + fmt(max_diff) +
              " spike_mismatches=" + std::to_string(spike_mismatches) + " time=" + fmt(secs, 3) + "s");
}

// ---------------------------------------------------------------------------

struct GradRow {
  std::string name;
  double rel = 0.0;
};

void gradient_suite() {
  std::mt19937_64 rng(77);
  const double h = 1e-3, tol = 1e-4;
  std::vector<GradRow> rows;
  auto check = [&](const std::string& name, const std::function<TensorD(const TensorD&)>& f, const TensorD& x) {
    rows.push_back({name, grad_check<double>(f, with_grad(x), h, tol).max_relative_error});
  };

  {
    auto e = rand_d(rng, {6, 3});
    auto probe = rand_d(rng, {6, 6});
    check("adjacency.embeddings", [&](const TensorD& v) { return sum(mul(build_adjacency(v, 2.0), probe)); }, e);
  }
  {
    const std::size_t n = 5, f = 4;
    auto x = rand_d(rng, {2, n, f});
    auto e = rand_d(rng, {n, 3});
    ObsWeights<double> w{rand_d(rng, {f, f}), rand_d(rng, {f, f}), rand_d(rng, {f, f})};
    NeighborSets sets = {{1, 3}, {0}, {0, 1, 4}, {}, {2, 3}};
    auto probe = rand_d(rng, {2, n, f});
    auto loss = [&](const TensorD& xx, const ObsWeights<double>& ww, const TensorD& ee) {
      return sum(mul(obs_forward(xx, sets, ww, build_adjacency(ee, 1.5)), probe));
    };
    check("obs.x", [&](const TensorD& v) { return loss(v, w, e); }, x);
    check("obs.wq", [&](const TensorD& v) { return loss(x, {v, w.wk, w.wv}, e); }, w.wq);
    check("obs.wk", [&](const TensorD& v) { return loss(x, {w.wq, v, w.wv}, e); }, w.wk);
    check("obs.wv", [&](const TensorD& v) { return loss(x, {w.wq, w.wk, v}, e); }, w.wv);
    check("obs.embeddings", [&](const TensorD& v) { return loss(x, w, v); }, e);
  }
  {
    const std::size_t in = 3, hd = 4;
    LstmWeights<double> w{rand_d(rng, {in, 4 * hd}), rand_d(rng, {hd, 4 * hd}), rand_d(rng, {4 * hd})};
    auto x = rand_d(rng, {2, 5, 2, in}, -2, 2);
    auto probe = rand_d(rng, {2, 5, 2, hd});
    auto loss = [&](const TensorD& xx, const LstmWeights<double>& ww) {
      return sum(mul(lstm_forward(xx, ww).hidden, probe));
    };
    check("lstm.x", [&](const TensorD& v) { return loss(v, w); }, x);
    check("lstm.wx", [&](const TensorD& v) { return loss(x, {v, w.wh, w.b}); }, w.wx);
    check("lstm.wh", [&](const TensorD& v) { return loss(x, {w.wx, v, w.b}); }, w.wh);
    check("lstm.b", [&](const TensorD& v) { return loss(x, {w.wx, w.wh, v}); }, w.b);
  }
  {
    const std::size_t p = 6, n = 3, dk = 4, tail = 3;
    auto q = rand_d(rng, {2, p, n, dk}, -2, 2), k = rand_d(rng, {2, p, n, dk}, -2, 2),
         v = rand_d(rng, {2, p, n, dk}, -2, 2);
    auto probe = rand_d(rng, {2, n, tail, dk});
    auto loss = [&](const TensorD& a, const TensorD& b, const TensorD& c) {
      return sum(mul(spike_attention(a, b, c, tail).out, probe));
    };
    check("ssa_score.q", [&](const TensorD& x) { return loss(x, k, v); }, q);
    check("ssa_score.k", [&](const TensorD& x) { return loss(q, x, v); }, k);
    check("ssa_score.v", [&](const TensorD& x) { return loss(q, k, x); }, v);
  }
  {
    const std::size_t hd = 4;
    auto a = rand_d(rng, {6, hd}, -2, 2), b = rand_d(rng, {6, hd}, -2, 2);
    GateWeights<double> w{rand_d(rng, {2 * hd, hd}), rand_d(rng, {hd})};
    auto probe = rand_d(rng, {6, hd});
    auto loss = [&](const TensorD& x, const TensorD& y, const GateWeights<double>& ww) {
      return sum(mul(gate_fuse(x, y, ww).fused, probe));
    };
    check("gate.h_lstm", [&](const TensorD& x) { return loss(x, b, w); }, a);
    check("gate.h_ssa", [&](const TensorD& x) { return loss(a, x, w); }, b);
    check("gate.w", [&](const TensorD& x) { return loss(a, b, {x, w.b}); }, w.w);
    check("gate.b", [&](const TensorD& x) { return loss(a, b, {w.w, x}); }, w.b);
  }
  {
    const std::size_t batch = 2, n = 3, hd = 5, l = 3;
    auto fused = rand_d(rng, {batch * n, hd});
    auto w = rand_d(rng, {n, hd + 1, l});
    auto probe = rand_d(rng, {batch, l, n});
    check("head.features", [&](const TensorD& x) { return sum(mul(prediction_head(x, w, batch), probe)); }, fused);
    check("head.w", [&](const TensorD& x) { return sum(mul(prediction_head(fused, x, batch), probe)); }, w);
  }

  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : rows) {
    std::cout << "  grad " << std::left << std::setw(22) << r.name << " rel_err " << fmt(r.rel, 3) << '\n';
    if (!(r.rel <= worst)) {
      worst = r.rel;
      worst_name = r.name;
    }
  }

  // Surrogate backward against the closed form at 100 sampled points.
  const double alpha = 2.0;
  auto xs = uniform(rng, 100, -3, 3);
  TensorD x({100}, xs, true);
  sum(heaviside(x, alpha)).backward();
  double surrogate_err = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double z = std::numbers::pi / 2 * alpha * xs[i];
    const double expect = alpha / (2.0 * (1.0 + z * z));
    surrogate_err = std::max(surrogate_err, std::abs(x.grad()[i] - expect));
  }
  verdict("gradient_suite", worst < tol && surrogate_err <= 1e-6,
          "checks=" + std::to_string(rows.size()) + " worst_rel_err=" + fmt(worst, 3) + " (" + worst_name +
              ") surrogate_max_abs_err=" + fmt(surrogate_err, 3));
}

// ---------------------------------------------------------------------------

template <typename T>
struct InvariantCount {
  std::uint64_t checks = 0;
  std::uint64_t binariness = 0;
  std::uint64_t reset = 0;
  std::uint64_t leak = 0;
  std::uint64_t spikes = 0;
};

// One population simulated for `steps` steps. Inputs alternate between
// random drive and silent stretches. Every step is checked against the
// one-step update; in double, silent stretches are also checked against
// h0 * beta^t from the start of the stretch.
template <typename T>
void simulate(std::mt19937_64& rng, std::size_t steps, std::size_t width, InvariantCount<T>& c) {
  std::uniform_real_distribution<double> beta_d(0.05, 1.0), th_d(0.3, 2.0), drive_d(-0.5, 1.5);
  LifParams p;
  p.beta = static_cast<float>(beta_d(rng));
  p.u_th = static_cast<float>(th_d(rng));
  p.u_reset = static_cast<float>(std::uniform_real_distribution<double>(-0.5, 0.9 * p.u_th)(rng));
  const double tol = 1e-6;
  BasicTensor<T> h = BasicTensor<T>::full({width}, static_cast<T>(p.u_reset));
  std::vector<double> stretch_start(width);
  std::size_t silent_for = 0;
  bool silent = false;
  for (std::size_t t = 0; t < steps; ++t) {
    if (t % 50 == 0) {
      silent = std::bernoulli_distribution(0.4)(rng);
      silent_for = 0;
      for (std::size_t i = 0; i < width; ++i) stretch_start[i] = h[i];
    }
    std::vector<T> in(width, T(0));
    if (!silent)
      for (auto& v : in) v = static_cast<T>(drive_d(rng));
    const BasicTensor<T> input({width}, in);
    const auto step = lif_step(p, h, input);
    ++silent_for;
    for (std::size_t i = 0; i < width; ++i) {
      ++c.checks;
      const double s = step.spike[i];
      const double u = static_cast<double>(in[i]) + static_cast<double>(h[i]);
      if (s != 0.0 && s != 1.0) ++c.binariness;
      if (s == 1.0) {
        ++c.spikes;
        if (std::abs(step.h[i] - p.u_reset) > tol) ++c.reset;
        if (silent) stretch_start[i] = std::numeric_limits<double>::quiet_NaN();
      } else if (std::abs(step.h[i] - p.beta * u) > tol) {
        ++c.leak;
      }
      if (std::is_same_v<T, double> && silent && !std::isnan(stretch_start[i])) {
        const double expect = stretch_start[i] * std::pow(static_cast<double>(p.beta), static_cast<double>(silent_for));
        if (std::abs(step.h[i] - expect) > tol) ++c.leak;
      }
    }
    h = step.h;
  }
}

void spike_invariants() {
  std::mt19937_64 rng(99);
  InvariantCount<float> cf;
  InvariantCount<double> cd;
  for (int run = 0; run < 8; ++run) {
    simulate<float>(rng, 10000, 16, cf);
    simulate<double>(rng, 10000, 16, cd);
  }
  const auto violations = cf.binariness + cf.reset + cf.leak + cd.binariness + cd.reset + cd.leak;
  verdict("spike_invariants", violations == 0,
          "neuron_steps=" + std::to_string(cf.checks + cd.checks) + " spikes=" + std::to_string(cf.spikes + cd.spikes) +
              " binariness=" + std::to_string(cf.binariness + cd.binariness) +
              " reset=" + std::to_string(cf.reset + cd.reset) + " leak=" + std::to_string(cf.leak + cd.leak));
}

// ---------------------------------------------------------------------------

void metric_scale_invariance(const cli::RunResult* trained) {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 500)(rng);
    auto target = uniform(rng, n, -10, 10);
    auto pred = target;
    for (auto& p : pred) p += std::normal_distribution<double>(0, 3)(rng);
    const double r2 = metric_r2(pred, target), rse = metric_rse(pred, target);
    for (double c : {1e-3, 0.37, 2.0, 1234.5}) {
      std::vector<double> ps(pred), ts(target);
      for (auto& p : ps) p *= c;
      for (auto& t : ts) t *= c;
      worst = std::max({worst, std::abs(metric_r2(ps, ts) - r2), std::abs(metric_rse(ps, ts) - rse)});
    }
  }
  if (trained) {
    const auto& e = trained->test;
    std::vector<double> pred(e.pred.begin(), e.pred.end()), target(e.target.begin(), e.target.end());
    const double r2 = metric_r2(pred, target), rse = metric_rse(pred, target);
    for (double c : {1e-3, 10.0}) {
      std::vector<double> ps(pred), ts(target);
      for (auto& p : ps) p *= c;
      for (auto& t : ts) t *= c;
      worst = std::max({worst, std::abs(metric_r2(ps, ts) - r2), std::abs(metric_rse(ps, ts) - rse)});
    }
  }
  verdict("metric_scale_invariance", worst <= 1e-9, "max_change=" + fmt(worst, 3));
}

// ---------------------------------------------------------------------------

cli::RunConfig base_config() {
  cli::RunConfig c;
  c.model.nodes = 8;
  c.model.input_len = 64;
  c.model.horizon = 3;
  c.model.epochs = 4;
  c.synth_steps = 2000;
  c.quiet = true;
  return c;
}

struct Run {
  cli::RunResult result;
  double seconds = 0.0;
};

Run train_run(Ablation a, std::uint64_t seed, std::size_t ts) {
  auto c = base_config();
  c.model.ablation = a;
  c.model.seed = seed;
  c.model.ts = ts;
  auto ds = cli::load_dataset(c);
  const auto t0 = Clock::now();
  auto r = cli::train_and_test(c, ds);
  Run run{std::move(r), seconds_since(t0)};
  std::cout << "  run " << to_string(a) << " seed " << seed << " Ts " << ts << ": test R2 " << fmt(run.result.test.r2)
            << "  RSE " << fmt(run.result.test.rse) << "  " << fmt(run.seconds, 3) << " s" << std::endl;
  return run;
}

WindowBatch test_batch(const ForecastModel& model, const SeriesDataset& ds, std::size_t count) {
  const auto& c = model.config();
  const auto splits = make_windows(ds, c.input_len, c.horizon, 1);
  std::vector<std::size_t> starts(splits.test.begin(),
                                  splits.test.begin() + static_cast<std::ptrdiff_t>(std::min(count, splits.test.size())));
  return gather_windows(ds, apply_zscore(ds, model.norm()), model.norm(), starts, c.input_len, c.horizon);
}

}  // namespace

int main() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  const auto start = Clock::now();

  oracle_equivalence();
  gradient_suite();
  spike_invariants();

  std::map<Ablation, std::vector<Run>> runs;
  for (auto a : {Ablation::W4, Ablation::W1, Ablation::W2, Ablation::W3})
    for (std::uint64_t seed = 1; seed <= 3; ++seed) runs[a].push_back(train_run(a, seed, 4));

  metric_scale_invariance(&runs[Ablation::W4][0].result);

  {
    std::vector<double> r2;
    double slowest = 0.0;
    for (const auto& r : runs[Ablation::W4]) {
      r2.push_back(r.result.test.r2);
      slowest = std::max(slowest, r.seconds);
    }
    const double med = cli::median(r2);
    verdict("learnability", med >= 0.80 && slowest < 600.0,
            "W4 median_test_r2=" + fmt(med) + " (seeds 1-3: " + fmt(r2[0]) + ", " + fmt(r2[1]) + ", " + fmt(r2[2]) +
                ") slowest_run=" + fmt(slowest, 3) + "s");
  }

  {
    std::vector<cli::VariantScore> rows;
    for (auto a : {Ablation::W1, Ablation::W2, Ablation::W3, Ablation::W4}) {
      cli::VariantScore row;
      row.ablation = a;
      for (const auto& r : runs[a]) {
        row.r2.push_back(r.result.test.r2);
        row.rse.push_back(r.result.test.rse);
      }
      row.median_r2 = cli::median(row.r2);
      row.median_rse = cli::median(row.rse);
      rows.push_back(row);
    }
    std::cout << cli::ablation_table(rows);
    const double w1 = rows[0].median_r2, w2 = rows[1].median_r2, w3 = rows[2].median_r2, w4 = rows[3].median_r2;
    verdict("ablation_ordering", w4 > w1 && w4 >= std::max(w2, w3) - 0.02,
            "median R2 W1=" + fmt(w1) + " W2=" + fmt(w2) + " W3=" + fmt(w3) + " W4=" + fmt(w4));
  }

  {
    std::vector<cli::SweepRow> rows;
    const auto& base = runs[Ablation::W4][0].result.test;
    rows.push_back({4, base.r2, base.rse});
    for (std::size_t ts : {8, 12, 16}) {
      const auto r = train_run(Ablation::W4, 1, ts);
      rows.push_back({ts, r.result.test.r2, r.result.test.rse});
    }
    std::cout << cli::sweep_table(rows);
    const double spread = cli::sweep_stability(rows);
    verdict("ts_stability", spread <= 0.05, "Ts={4,8,12,16} max-min test R2=" + fmt(spread));
  }

  const auto& trained = runs[Ablation::W4][0].result;
  auto cfg = base_config();
  cfg.model.seed = 1;
  const auto ds = cli::load_dataset(cfg);

  {
    const auto batch = test_batch(trained.model, ds, 32);
    const auto ops = count_ops(trained.model, batch);
    const auto report = estimate_energy(ops.spiking, ops.twin);
    std::cout << energy_table(report, trained.test.r2);
    verdict("energy", report.reduction_pct >= 20.0,
            "reduction=" + fmt(report.reduction_pct) + "% spiking_mJ=" + fmt(report.energy_mj) +
                " twin_mJ=" + fmt(report.twin_energy_mj) + " batch=32");
  }

  {
    const auto path = (fs::temp_directory_path() / "spikecast_acceptance.stag").string();
    save_model(path, trained.model);
    const auto loaded = load_model(path);
    fs::remove(path);
    const auto batch = test_batch(trained.model, ds, 64);
    const auto a = trained.model.predict(batch), b = loaded.predict(batch);
    const bool identical = a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;

    const auto again = train_run(Ablation::W4, 1, 4);
    bool same_curve = again.result.report.epochs.size() == trained.report.epochs.size();
    for (std::size_t i = 0; same_curve && i < trained.report.epochs.size(); ++i) {
      const auto &x = trained.report.epochs[i], &y = again.result.report.epochs[i];
      same_curve = x.loss == y.loss && x.val_r2 == y.val_r2 && x.val_rse == y.val_rse;
    }
    const bool same_test = again.result.test.r2 == trained.test.r2 && again.result.test.rse == trained.test.rse &&
                           again.result.test.pred == trained.test.pred;
    verdict("serialization", identical && same_curve && same_test,
            std::string("round_trip_predictions=") + (identical ? "bit-identical" : "DIFFER") +
                " rerun_metrics=" + (same_curve && same_test ? "identical" : "DIFFER") + " (" +
                std::to_string(a.size()) + " values)");
  }

  std::cout << "acceptance: " << (9 - g_failures) << "/9 passed in " << fmt(seconds_since(start), 4) << " s"
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}

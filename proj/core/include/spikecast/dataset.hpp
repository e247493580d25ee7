#pragma once

// Regularly sampled multivariate series, CSV ingestion, chronological
// windowing and z-score normalisation.
//
// CSV layout: header row "timestamp,<node>,<node>,...", then one row per
// step with an ISO-8601 UTC timestamp and one decimal value per node.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spikecast/tensor.hpp"

namespace spikecast {

struct SeriesDataset {
  std::vector<std::int64_t> timestamps;  // Unix seconds, UTC
  std::vector<float> values;             // (steps, nodes), row-major
  std::vector<std::string> node_names;
  std::int64_t interval_seconds = 0;

  std::size_t steps() const { return timestamps.size(); }
  std::size_t nodes() const { return node_names.size(); }
  float at(std::size_t step, std::size_t node) const { return values[step * nodes() + node]; }
};

/// "YYYY-MM-DDTHH:MM[:SS][Z]" (a space may replace T). Throws IngestionError.
std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t seconds);

SeriesDataset read_csv(std::istream& in);
SeriesDataset load_csv(const std::string& path);
void write_csv(std::ostream& out, const SeriesDataset& ds);
void save_csv(const std::string& path, const SeriesDataset& ds);

struct Calendar {
  int minute = 0;  // 0..59
  int hour = 0;    // 0..23
  int dow = 0;     // Monday = 0
};

Calendar calendar_of(std::int64_t seconds);

/// Minute-of-hour carries information only for sub-hourly sampling.
inline bool uses_minute_of_hour(std::int64_t interval_seconds) { return interval_seconds < 3600; }

struct SplitFractions {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

/// Start indices of windows [s, s+T) -> [s+T, s+T+L) lying inside [begin, end).
std::vector<std::size_t> window_starts(std::size_t begin, std::size_t end, std::size_t input_len,
                                       std::size_t horizon, std::size_t stride);

struct WindowSplits {
  std::size_t train_end = 0;  // step boundaries of the three segments
  std::size_t val_end = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// The series is cut into consecutive train / val / test segments and
/// windows are formed inside each one, so no window straddles a boundary.
/// Throws ContractError when input_len + horizon exceeds the series length.
WindowSplits make_windows(const SeriesDataset& ds, std::size_t input_len, std::size_t horizon,
                          std::size_t stride, const SplitFractions& fractions = {});

struct NormStats {
  std::vector<float> mean;
  std::vector<float> std;

  bool empty() const { return mean.empty(); }
};

/// Per-node statistics over steps [begin, end). A zero std is clamped to 1.
NormStats fit_zscore(const SeriesDataset& ds, std::size_t begin, std::size_t end);

/// (steps, nodes) normalised copy of ds.values.
std::vector<float> apply_zscore(const SeriesDataset& ds, const NormStats& stats);

/// In-place inverse over a row-major (..., nodes) buffer.
void invert_zscore(std::vector<float>& values, const NormStats& stats);

struct WindowBatch {
  Tensor inputs;                   // (B, T, N), normalised
  Tensor targets;                  // (B, L, N), normalised
  std::vector<Calendar> calendar;  // (B, T) row-major
  std::vector<std::int64_t> start_times;
  std::int64_t interval_seconds = 0;
  NormStats stats;

  std::size_t size() const { return start_times.size(); }
};

WindowBatch gather_windows(const SeriesDataset& ds, const std::vector<float>& normalized,
                           const NormStats& stats, const std::vector<std::size_t>& starts,
                           std::size_t input_len, std::size_t horizon);

/// Window of the last input_len steps of ds (no target), for forecasting
/// beyond the end of the data. targets is (1, horizon, N) of zeros.
WindowBatch latest_window(const SeriesDataset& ds, const NormStats& stats, std::size_t input_len,
                          std::size_t horizon);

}  // namespace spikecast

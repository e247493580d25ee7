#include "spikecast/dataset.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spikecast/errors.hpp"

namespace spikecast {

namespace {

constexpr std::int64_t kDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::int64_t parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int consumed = 0;
  const int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
  if (n < 6 || (sep != 'T' && sep != ' ')) throw IngestionError("bad timestamp '" + text + "'");
  std::string rest = text.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest[0] == ':') {
    int used = 0;
    if (std::sscanf(rest.c_str(), ":%2d%n", &s, &used) != 1) {
      throw IngestionError("bad timestamp '" + text + "'");
    }
    rest = rest.substr(static_cast<std::size_t>(used));
  }
  if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
    throw IngestionError("timestamp '" + text + "' is not UTC");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) throw IngestionError("bad timestamp '" + text + "'");
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * kDay + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(std::int64_t seconds) {
  const std::int64_t days = floor_div(seconds, kDay);
  const std::int64_t rem = seconds - days * kDay;
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return buf;
}

Calendar calendar_of(std::int64_t seconds) {
  const std::int64_t days = floor_div(seconds, kDay);
  const std::int64_t rem = seconds - days * kDay;
  Calendar c;
  c.minute = static_cast<int>(rem / 60 % 60);
  c.hour = static_cast<int>(rem / 3600);
  c.dow = static_cast<int>(((days + 3) % 7 + 7) % 7);  // 1970-01-01 was a Thursday
  return c;
}

SeriesDataset read_csv(std::istream& in) {
  SeriesDataset ds;
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw IngestionError("row 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_fields(line);
  if (trim(header[0]) != "timestamp") throw IngestionError("row 1: first column must be 'timestamp'");
  for (std::size_t i = 1; i < header.size(); ++i) ds.node_names.push_back(trim(header[i]));
  if (ds.node_names.empty()) throw IngestionError("row 1: no value columns");
  const std::size_t n = ds.node_names.size();

  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != n + 1) {
      throw IngestionError("row " + std::to_string(row) + ": expected " + std::to_string(n + 1) +
                           " fields, got " + std::to_string(fields.size()));
    }
    std::int64_t ts = 0;
    try {
      ts = parse_timestamp(trim(fields[0]));
    } catch (const IngestionError& e) {
      throw IngestionError("row " + std::to_string(row) + ": " + e.what());
    }
    if (!ds.timestamps.empty()) {
      const std::int64_t step = ts - ds.timestamps.back();
      if (ds.timestamps.size() == 1) {
        if (step <= 0) throw IngestionError("row " + std::to_string(row) + ": timestamps not increasing");
        ds.interval_seconds = step;
      } else if (step != ds.interval_seconds) {
        throw IngestionError("row " + std::to_string(row) + ": irregular spacing (gap of " +
                             std::to_string(step) + " s, expected " + std::to_string(ds.interval_seconds) +
                             " s)");
      }
    }
    ds.timestamps.push_back(ts);
    for (std::size_t i = 1; i <= n; ++i) {
      const std::string cell = trim(fields[i]);
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw IngestionError("row " + std::to_string(row) + ": non-numeric value '" + cell + "' in column " +
                             ds.node_names[i - 1]);
      }
      ds.values.push_back(v);
    }
  }
  if (ds.timestamps.empty()) throw IngestionError("no data rows");
  return ds;
}

SeriesDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  return read_csv(in);
}

void write_csv(std::ostream& out, const SeriesDataset& ds) {
  out << "timestamp";
  for (const auto& name : ds.node_names) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t t = 0; t < ds.steps(); ++t) {
    out << format_timestamp(ds.timestamps[t]);
    for (std::size_t i = 0; i < ds.nodes(); ++i) {
      const auto res = std::to_chars(buf, buf + sizeof buf, ds.at(t, i));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

void save_csv(const std::string& path, const SeriesDataset& ds) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  write_csv(out, ds);
}

std::vector<std::size_t> window_starts(std::size_t begin, std::size_t end, std::size_t input_len,
                                       std::size_t horizon, std::size_t stride) {
  if (stride == 0) throw ContractError("window_starts: stride must be >= 1");
  std::vector<std::size_t> starts;
  const std::size_t span = input_len + horizon;
  for (std::size_t s = begin; s + span <= end; s += stride) starts.push_back(s);
  return starts;
}

WindowSplits make_windows(const SeriesDataset& ds, std::size_t input_len, std::size_t horizon,
                          std::size_t stride, const SplitFractions& fractions) {
  const std::size_t n = ds.steps();
  if (input_len == 0 || horizon == 0) throw ContractError("make_windows: T and L must be >= 1");
  if (input_len + horizon > n) {
    throw ContractError("make_windows: T + L = " + std::to_string(input_len + horizon) +
                        " exceeds series length " + std::to_string(n));
  }
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 ||
      fractions.train + fractions.val + fractions.test > 1.0 + 1e-9) {
    throw ContractError("make_windows: split fractions must be non-negative and sum to at most 1");
  }
  WindowSplits out;
  const auto boundary = [n](double fraction) {
    return std::min(n, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
  };
  out.train_end = boundary(fractions.train);
  out.val_end = boundary(fractions.train + fractions.val);
  const auto test_end = boundary(fractions.train + fractions.val + fractions.test);
  out.train = window_starts(0, out.train_end, input_len, horizon, stride);
  out.val = window_starts(out.train_end, out.val_end, input_len, horizon, stride);
  out.test = window_starts(out.val_end, test_end, input_len, horizon, stride);
  return out;
}

NormStats fit_zscore(const SeriesDataset& ds, std::size_t begin, std::size_t end) {
  end = std::min(end, ds.steps());
  if (begin >= end) throw ContractError("fit_zscore: empty step range");
  const std::size_t n = ds.nodes();
  NormStats stats;
  stats.mean.resize(n);
  stats.std.resize(n);
  const double count = static_cast<double>(end - begin);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t t = begin; t < end; ++t) sum += ds.at(t, i);
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
      const double d = ds.at(t, i) - mean;
      sq += d * d;
    }
    const double sd = std::sqrt(sq / count);
    stats.mean[i] = static_cast<float>(mean);
    stats.std[i] = sd > 1e-12 ? static_cast<float>(sd) : 1.0f;
  }
  return stats;
}

std::vector<float> apply_zscore(const SeriesDataset& ds, const NormStats& stats) {
  const std::size_t n = ds.nodes();
  if (stats.mean.size() != n || stats.std.size() != n) {
    throw ContractError("apply_zscore: statistics cover " + std::to_string(stats.mean.size()) +
                        " nodes, dataset has " + std::to_string(n));
  }
  std::vector<float> out(ds.values.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t i = k % n;
    out[k] = (ds.values[k] - stats.mean[i]) / stats.std[i];
  }
  return out;
}

void invert_zscore(std::vector<float>& values, const NormStats& stats) {
  const std::size_t n = stats.mean.size();
  if (n == 0) throw ContractError("invert_zscore: missing normalisation statistics");
  if (values.size() % n != 0) throw DimensionError("invert_zscore: buffer is not a multiple of the node count");
  for (std::size_t k = 0; k < values.size(); ++k) {
    const std::size_t i = k % n;
    values[k] = values[k] * stats.std[i] + stats.mean[i];
  }
}

WindowBatch gather_windows(const SeriesDataset& ds, const std::vector<float>& normalized,
                           const NormStats& stats, const std::vector<std::size_t>& starts,
                           std::size_t input_len, std::size_t horizon) {
  const std::size_t n = ds.nodes(), b = starts.size();
  std::vector<float> in(b * input_len * n), tgt(b * horizon * n);
  WindowBatch batch;
  batch.calendar.reserve(b * input_len);
  for (std::size_t e = 0; e < b; ++e) {
    const std::size_t s = starts[e];
    if (s + input_len + horizon > ds.steps()) {
      throw ContractError("gather_windows: window at " + std::to_string(s) + " runs past the series end");
    }
    std::copy_n(normalized.begin() + static_cast<std::ptrdiff_t>(s * n), input_len * n,
                in.begin() + static_cast<std::ptrdiff_t>(e * input_len * n));
    std::copy_n(normalized.begin() + static_cast<std::ptrdiff_t>((s + input_len) * n), horizon * n,
                tgt.begin() + static_cast<std::ptrdiff_t>(e * horizon * n));
    for (std::size_t t = 0; t < input_len; ++t) batch.calendar.push_back(calendar_of(ds.timestamps[s + t]));
    batch.start_times.push_back(ds.timestamps[s]);
  }
  batch.inputs = Tensor(Shape{b, input_len, n}, std::move(in));
  batch.targets = Tensor(Shape{b, horizon, n}, std::move(tgt));
  batch.interval_seconds = ds.interval_seconds;
  batch.stats = stats;
  return batch;
}

WindowBatch latest_window(const SeriesDataset& ds, const NormStats& stats, std::size_t input_len,
                          std::size_t horizon) {
  if (input_len > ds.steps()) {
    throw ContractError("latest_window: series has " + std::to_string(ds.steps()) + " steps, need " +
                        std::to_string(input_len));
  }
  const auto normalized = apply_zscore(ds, stats);
  const std::size_t n = ds.nodes(), s = ds.steps() - input_len;
  WindowBatch batch;
  std::vector<float> in(normalized.begin() + static_cast<std::ptrdiff_t>(s * n), normalized.end());
  batch.inputs = Tensor(Shape{1, input_len, n}, std::move(in));
  batch.targets = Tensor(Shape{1, horizon, n});
  for (std::size_t t = 0; t < input_len; ++t) batch.calendar.push_back(calendar_of(ds.timestamps[s + t]));
  batch.start_times.push_back(ds.timestamps[s]);
  batch.interval_seconds = ds.interval_seconds;
  batch.stats = stats;
  return batch;
}

}  // namespace spikecast

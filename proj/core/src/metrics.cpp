#include "spikecast/metrics.hpp"

#include <cmath>
#include <string>

#include "spikecast/errors.hpp"

namespace spikecast {

namespace {

struct SquaredErrors {
  double residual = 0.0;
  double total = 0.0;
};

template <typename T>
SquaredErrors squared_errors(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) {
    throw DimensionError("metric: prediction has " + std::to_string(pred.size()) + " values, target " +
                         std::to_string(target.size()));
  }
  if (target.empty()) throw UndefinedMetricError("metric: empty target");
  double mean = 0.0;
  for (auto v : target) mean += static_cast<double>(v);
  mean /= static_cast<double>(target.size());
  SquaredErrors out;
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double r = static_cast<double>(pred[k]) - static_cast<double>(target[k]);
    const double c = static_cast<double>(target[k]) - mean;
    out.residual += r * r;
    out.total += c * c;
  }
  if (!(out.total > 0.0)) throw UndefinedMetricError("metric: target is constant");
  return out;
}

}  // namespace

double metric_rse(std::span<const double> pred, std::span<const double> target) {
  const auto e = squared_errors(pred, target);
  return std::sqrt(e.residual) / std::sqrt(e.total);
}

double metric_r2(std::span<const double> pred, std::span<const double> target) {
  const auto e = squared_errors(pred, target);
  return 1.0 - e.residual / e.total;
}

double metric_rse(std::span<const float> pred, std::span<const float> target) {
  const auto e = squared_errors(pred, target);
  return std::sqrt(e.residual) / std::sqrt(e.total);
}

double metric_r2(std::span<const float> pred, std::span<const float> target) {
  const auto e = squared_errors(pred, target);
  return 1.0 - e.residual / e.total;
}

}  // namespace spikecast

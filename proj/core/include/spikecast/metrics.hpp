#pragma once

// Global forecast metrics over all nodes and steps, accumulated in double.
// Both throw UndefinedMetricError when the target has zero variance.

#include <span>

namespace spikecast {

double metric_rse(std::span<const double> pred, std::span<const double> target);
double metric_r2(std::span<const double> pred, std::span<const double> target);
double metric_rse(std::span<const float> pred, std::span<const float> target);
double metric_r2(std::span<const float> pred, std::span<const float> target);

}  // namespace spikecast

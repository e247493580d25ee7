#pragma once

#include <stdexcept>
#include <string>

namespace spikecast {

/// Tensor shapes disagree for an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A precondition of an API call was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input data (CSV ingestion). Messages carry the offending row.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint or report file does not match the expected binary layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Metric is undefined for the given data (e.g. constant target).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spikecast

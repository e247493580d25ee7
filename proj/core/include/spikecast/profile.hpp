#pragma once

// Lightweight op instrumentation. Ops report their arithmetic to the
// innermost active OpProfile on the calling thread; with no profile active
// reporting is a no-op.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace spikecast {

struct OpRecord {
  std::string op;
  std::string scope;  // '/'-joined OpScope names active at call time
  std::size_t rows = 0;
  std::size_t inner = 0;
  std::size_t cols = 0;
  std::uint64_t macs = 0;
  std::uint64_t adds = 0;
};

class OpProfile {
 public:
  OpProfile();
  ~OpProfile();
  OpProfile(const OpProfile&) = delete;
  OpProfile& operator=(const OpProfile&) = delete;

  const std::vector<OpRecord>& records() const { return records_; }
  void add(OpRecord record) { records_.push_back(std::move(record)); }

  // Records whose scope starts with `prefix`.
  std::vector<OpRecord> in_scope(const std::string& prefix) const;

 private:
  std::vector<OpRecord> records_;
  OpProfile* previous_;
};

class OpScope {
 public:
  explicit OpScope(const std::string& name);
  ~OpScope();
  OpScope(const OpScope&) = delete;
  OpScope& operator=(const OpScope&) = delete;
};

bool op_profiling_active();
void record_op(const char* op, std::size_t rows, std::size_t inner, std::size_t cols,
               std::uint64_t macs, std::uint64_t adds);

}  // namespace spikecast

#include "spikecast/profile.hpp"

namespace spikecast {

namespace {
thread_local OpProfile* g_profile = nullptr;
thread_local std::vector<std::string> g_scopes;

std::string joined_scope() {
  std::string out;
  for (const auto& s : g_scopes) {
    if (!out.empty()) out += '/';
    out += s;
  }
  return out;
}
}  // namespace

OpProfile::OpProfile() : previous_(g_profile) { g_profile = this; }
OpProfile::~OpProfile() { g_profile = previous_; }

std::vector<OpRecord> OpProfile::in_scope(const std::string& prefix) const {
  std::vector<OpRecord> out;
  for (const auto& r : records_) {
    if (r.scope.compare(0, prefix.size(), prefix) == 0) out.push_back(r);
  }
  return out;
}

OpScope::OpScope(const std::string& name) { g_scopes.push_back(name); }
OpScope::~OpScope() { g_scopes.pop_back(); }

bool op_profiling_active() { return g_profile != nullptr; }

void record_op(const char* op, std::size_t rows, std::size_t inner, std::size_t cols,
               std::uint64_t macs, std::uint64_t adds) {
  if (!g_profile) return;
  g_profile->add(OpRecord{op, joined_scope(), rows, inner, cols, macs, adds});
}

}  // namespace spikecast

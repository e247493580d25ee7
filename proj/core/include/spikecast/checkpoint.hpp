#pragma once

// Binary checkpoint:
//   "STAG" | u32 version | u32 count | count x tensor
//   tensor: u16 name length | UTF-8 name | u8 rank | rank x u32 dim | f32 data
// All integers and floats little-endian, data row-major.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spikecast/model.hpp"

namespace spikecast {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors);
/// Throws FormatError on a bad magic, unknown version or truncated data.
std::vector<NamedTensor> read_tensors(std::istream& in);

void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::string& path);

void save_model(const std::string& path, const ForecastModel& model);
ForecastModel load_model(const std::string& path);

}  // namespace spikecast

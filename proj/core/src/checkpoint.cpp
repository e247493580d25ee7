#include "spikecast/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "spikecast/errors.hpp"

namespace spikecast {

namespace {

template <typename U>
void put(std::ostream& out, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
  return value;
}

}  // namespace

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write("STAG", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xffff) throw FormatError("checkpoint: tensor name too long");
    if (t.rank() > 0xff) throw FormatError("checkpoint: tensor rank too large");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : t.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "STAG", 4) != 0) {
    throw FormatError("checkpoint: bad magic (expected \"STAG\")");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in, "tensor count");
  std::vector<NamedTensor> tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("checkpoint truncated while reading a tensor name");
    const auto rank = get<std::uint8_t>(in, "rank");
    Shape shape;
    for (std::uint8_t r = 0; r < rank; ++r) shape.push_back(get<std::uint32_t>(in, "dims"));
    std::vector<float> data(shape_numel(shape));
    for (auto& v : data) v = std::bit_cast<float>(get<std::uint32_t>(in, name.c_str()));
    tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return tensors;
}

void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  write_tensors(out, tensors);
}

std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_tensors(in);
}

void save_model(const std::string& path, const ForecastModel& model) { save_tensors(path, model.state()); }

ForecastModel load_model(const std::string& path) { return ForecastModel::from_state(load_tensors(path)); }

}  // namespace spikecast

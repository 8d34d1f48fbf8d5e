#include "ram/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ram {

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'A', 'M', 'C', 'K', 'P', 'T', '\0'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw CheckpointError("checkpoint truncated");
  return std::uint32_t(bytes[0]) | (std::uint32_t(bytes[1]) << 8) | (std::uint32_t(bytes[2]) << 16) |
         (std::uint32_t(bytes[3]) << 24);
}

void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

}  // namespace

void write_checkpoint(std::ostream& out, const ParamStore<float>& params) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kCheckpointVersion);
  put_u32(out, std::uint32_t(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    const auto& value = params.value(i);
    put_u32(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    put_u32(out, std::uint32_t(value.rank()));
    for (auto d : value.shape()) put_u32(out, std::uint32_t(d));
    for (float f : value.values()) put_f32(out, f);
  }
  if (!out) throw CheckpointError("failed writing checkpoint stream");
}

ParamStore<float> read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw CheckpointError("not a checkpoint file");
  const auto version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get_u32(in);
  ParamStore<float> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get_u32(in);
    if (name_len > 4096) throw CheckpointError("implausible parameter name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw CheckpointError("checkpoint truncated");
    const auto rank = get_u32(in);
    if (rank == 0 || rank > 8) throw CheckpointError("bad rank for parameter " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get_u32(in);
    Tensor<float> value(shape);
    for (auto& f : value.values()) f = get_f32(in);
    params.add(name, std::move(value));
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
}

ParamStore<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void assign_parameters(ParamStore<float>& target, const ParamStore<float>& source) {
  if (target.size() != source.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(source.size()) + " parameters, model expects " +
                          std::to_string(target.size()));
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto& name = target.name(i);
    if (!source.contains(name)) throw CheckpointError("checkpoint lacks parameter " + name);
    const auto& src = source.value(source.index_of(name));
    if (src.shape() != target.value(i).shape()) {
      throw CheckpointError("parameter " + name + " has shape " + shape_string(src.shape()) + ", expected " +
                            shape_string(target.value(i).shape()));
    }
    target.value(i) = src;
  }
}

}  // namespace ram

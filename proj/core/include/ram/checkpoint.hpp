#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "ram/params.hpp"

namespace ram {

/// Binary parameter file:
///   "RAMCKPT\0" | u32 version | u32 count |
///   count x ( u32 name_len | name | u32 rank | u32 dims[rank] | f32 payload[] )
/// All integers and floats are little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& out, const ParamStore<float>& params);
ParamStore<float> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params);
ParamStore<float> load_checkpoint(const std::filesystem::path& path);

/// Copies values from `source` into same-named, same-shaped entries of `target`.
/// Any missing name or shape mismatch is an error.
void assign_parameters(ParamStore<float>& target, const ParamStore<float>& source);

}  // namespace ram

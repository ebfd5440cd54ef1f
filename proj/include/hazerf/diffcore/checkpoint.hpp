#pragma once

#include "hazerf/diffcore/param_store.hpp"

#include <filesystem>
#include <iosfwd>

namespace hazerf {

/// Binary parameter checkpoint:
///   "HZRFCKPT" | u32 version | u32 count |
///   count x (u32 name_len | name | u32 rank | u64 dims[rank] | f64 values[prod(dims)])
/// All integers and reals little-endian. Round-trips bit-exactly.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ParamStore& params);
ParamStore read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
ParamStore load_checkpoint(const std::filesystem::path& path);

/// Copies values from `src` into `dst`; names and shapes must agree exactly.
void restore_values(ParamStore& dst, const ParamStore& src);

}  // namespace hazerf

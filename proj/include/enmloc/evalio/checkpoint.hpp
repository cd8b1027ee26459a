#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "enmloc/enm_model.hpp"

namespace enmloc::evalio {

inline constexpr char kCheckpointMagic[4] = {'E', 'N', 'M', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian binary layout:
///   "ENM1", u32 version, f64 origin x, f64 origin y, f64 resolution,
///   u32 nx, u32 ny, u32 D, u32 L,
///   f32 features in (j * nx + i) * D order,
///   then per layer (F_p x3, H_sdf, F_d x3, H_psdf):
///   u32 in, u32 out, f32 weights (out x in, row-major), f32 bias.
/// Parameters are stored at float precision.
void save_checkpoint(std::ostream& os, const EnmModel& model);
void save_checkpoint_file(const std::string& path, const EnmModel& model);

/// Throws FormatError on a bad magic or version and CorruptionError on a
/// truncated or inconsistent body.
EnmModel load_checkpoint(std::istream& is);
EnmModel load_checkpoint_file(const std::string& path);

/// Exact size in bytes of the checkpoint of `model`.
std::size_t checkpoint_size(const EnmModel& model);

}  // namespace enmloc::evalio

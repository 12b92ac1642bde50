#pragma once

#include <filesystem>
#include <iosfwd>

#include "vprune/types.hpp"

namespace vprune {

// Raw volume format: magic "CVOL", u32 version=1, u32 nx ny nz,
// f32 sx sy sz, then nx*ny*nz f32 scalars in x-fastest row-major order.
// Everything little-endian. Scalars are stored at 32-bit width, so a
// write -> read -> write cycle is byte-identical.
void cvol_write(std::ostream& out, const ScalarVolume& vol);
ScalarVolume cvol_read(std::istream& in);

void cvol_write(const std::filesystem::path& path, const ScalarVolume& vol);
ScalarVolume cvol_read(const std::filesystem::path& path);

}  // namespace vprune

#pragma once

#include <string>
#include <filesystem>
#include <string_view>

#include "vprune/types.hpp"

namespace vprune {

// Parses SWC text: `#` lines are comments, data lines carry
// id kind x y z radius parent. Node order is preserved.
// Throws ParseError (with line number) on malformed lines and
// StructureError on dangling parents, duplicate ids or cycles.
VesselTree swc_parse(std::string_view text);

// One data line per node, 9 significant digits. swc_parse(swc_serialize(t))
// reproduces t to <= 1e-6 mm.
std::string swc_serialize(const VesselTree& tree);

VesselTree swc_read(const std::filesystem::path& path);
void swc_write(const std::filesystem::path& path, const VesselTree& tree);

}  // namespace vprune

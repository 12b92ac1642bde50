#pragma once

#include "vprune/types.hpp"

namespace vprune {

// Subdivides every parent-child edge longer than `step_mm` by linear
// interpolation so all output edges are <= step_mm. Existing nodes keep their
// ids and positions; inserted nodes get fresh ids above the current maximum.
// Path geometry and total length are preserved.
VesselTree resample_polyline(const VesselTree& tree, double step_mm);

}  // namespace vprune

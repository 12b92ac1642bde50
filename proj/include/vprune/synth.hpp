#pragma once

#include <cstdint>

#include "vprune/types.hpp"

namespace vprune {

struct SynthParams {
    std::uint64_t rng_seed = 1;
    int n_trees = 1;
    int depth = 2;                    // max bifurcation depth; 0 = unbranched root segment
    double branch_len_min_mm = 12.0;
    double branch_len_max_mm = 20.0;
    double branch_angle_min_deg = 20.0;
    double branch_angle_max_deg = 50.0;
    double radius_root_mm = 2.0;
    double radius_decay = 0.8;        // in (0, 1]
    double margin_mm = 6.0;           // keep-out from volume faces, >= heatmap radius
    GridDims dims{80, 80, 80};
    Vec3 spacing{1.0, 1.0, 1.0};

    void validate() const;
};

// Recursive bifurcating forest, deterministic in rng_seed. Every node stays
// at least margin_mm inside the volume; children that cannot be placed after
// a bounded number of direction draws are dropped.
VesselTree generate_forest(const SynthParams& params);

}  // namespace vprune

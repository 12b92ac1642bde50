#pragma once

#include <cstdint>
#include <vector>

#include "vprune/types.hpp"

namespace vprune {

struct TracerParams {
    double binarize_threshold = 0.3;   // heatmap units, in (0,1)
    double dilation_radius_vox = 1.0;  // Euclidean radius in voxel units
    int min_component_voxels = 27;
    double coverage_stop = 0.98;       // fraction of component voxels, in (0,1]
    double min_branch_len_mm = 2.0;
    double step_size_mm = 0.5;         // node spacing along back-tracked paths

    void validate() const;
};

// mask(v)=1 iff some voxel within dilation_radius (voxel units) of v has
// heatmap >= binarize_threshold
ScalarVolume binarize_dilate(const ScalarVolume& heatmap, const TracerParams& params);

// 26-connected foreground components, smallest discarded, ordered by
// decreasing size (ties by lowest contained voxel index). Voxel lists are
// sorted ascending.
std::vector<std::vector<std::int64_t>> connected_components(const ScalarVolume& mask,
                                                            int min_component_voxels);

struct TimeField {
    ScalarVolume times;   // geodesic arrival times; +inf outside the reached set
    std::int64_t source = -1;
};

// First-order fast marching of |grad T| * F = 1 restricted to the component,
// F(v) = (heatmap(v) + 1e-4)^2, 6-neighbor stencil.
TimeField fast_march(const ScalarVolume& heatmap, const std::vector<std::int64_t>& component,
                     std::int64_t source);

// Iterative geodesic back-tracking of one component; returns a single rooted
// tree (possibly empty when nothing of at least min_branch_len is found).
VesselTree trace_component(const ScalarVolume& heatmap,
                           const std::vector<std::int64_t>& component,
                           const TracerParams& params);

// Full pipeline: binarize+dilate, split into components, trace each, merge
// with unique ids. Empty mask yields an empty forest.
VesselTree trace_all(const ScalarVolume& heatmap, const TracerParams& params);

}  // namespace vprune

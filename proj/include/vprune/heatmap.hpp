#pragma once

#include <cstdint>

#include "vprune/types.hpp"

namespace vprune {

struct HeatmapParams {
    double alpha = 6.0;
    double d_max_mm = 5.0;

    void validate() const {
        if (!(alpha > 0.0)) throw ConfigError("heatmap.alpha: must be positive");
        if (!(d_max_mm > 0.0)) throw ConfigError("heatmap.d_max_mm: must be positive");
    }
};

// Distance from each voxel center to the nearest centerline segment of
// `tree`, computed only where it can be <= cutoff_mm; +inf elsewhere.
ScalarVolume centerline_distance_field(const VesselTree& tree, GridDims dims,
                                       const Vec3& spacing, double cutoff_mm);

// Centerline proximity heatmap: exp(-alpha * D(p) / d_max) where the
// perpendicular distance D(p) is at most d_max, 0 beyond. Values lie in
// [0,1] with 1 exactly on the centerline.
ScalarVolume compute_heatmap(const VesselTree& tree, GridDims dims, const Vec3& spacing,
                             const HeatmapParams& hp);

struct CorruptParams {
    double noise_sigma = 0.04;
    int dropout_count = 2;
    double dropout_radius_mm = 2.5;
    int spurious_count = 4;
    double spurious_len_mm = 18.0;
    double spurious_intensity = 0.8;
    double clearance_mm = 7.5;   // min distance between a spurious tube and the true tree

    void validate() const {
        if (noise_sigma < 0.0) throw ConfigError("corrupt.noise_sigma: must be >= 0");
        if (dropout_count < 0) throw ConfigError("corrupt.dropout_count: must be >= 0");
        if (!(dropout_radius_mm > 0.0)) throw ConfigError("corrupt.dropout_radius_mm: must be positive");
        if (spurious_count < 0) throw ConfigError("corrupt.spurious_count: must be >= 0");
        if (!(spurious_len_mm > 0.0)) throw ConfigError("corrupt.spurious_len_mm: must be positive");
        if (spurious_intensity < 0.0 || spurious_intensity > 1.0)
            throw ConfigError("corrupt.spurious_intensity: must be in [0,1]");
        if (clearance_mm < 0.0) throw ConfigError("corrupt.clearance_mm: must be >= 0");
    }
};

// Emulates imperfect predictions: adds spurious tube responses away from the
// true tree, zeroes dropout balls centered on centerline points, then adds
// clamped Gaussian noise. Deterministic in `seed`; all-zero parameters give
// the identity. `tubes_placed`, when given, receives the number of spurious
// tubes that found a clear spot.
ScalarVolume corrupt_heatmap(const ScalarVolume& heatmap, const VesselTree& tree,
                             const HeatmapParams& hp, const CorruptParams& cp,
                             std::uint64_t seed, int* tubes_placed = nullptr);

}  // namespace vprune

#pragma once

#include <limits>
#include <vector>

#include "vprune/types.hpp"

namespace vprune {

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);

// Uniform-grid index over a set of 3D segments for exact nearest-distance
// queries (expanding ring search). Used for centerline distance fields,
// target labelling and the evaluation metrics.
class PolylineIndex {
public:
    PolylineIndex() = default;
    explicit PolylineIndex(const std::vector<std::pair<Vec3, Vec3>>& segments,
                           double cell_mm = 2.0);
    explicit PolylineIndex(const VesselTree& tree, double cell_mm = 2.0);

    bool empty() const { return segments_.empty(); }
    std::size_t segment_count() const { return segments_.size(); }

    // Exact min distance from p to any segment; +inf when the index is empty.
    double nearest_distance(const Vec3& p) const;

    // Brute-force reference path, O(#segments) per query.
    double nearest_distance_exhaustive(const Vec3& p) const;

private:
    std::vector<std::pair<Vec3, Vec3>> segments_;
    double cell_ = 2.0;
    Vec3 origin_{0, 0, 0};
    int cx_ = 0, cy_ = 0, cz_ = 0;
    std::vector<std::vector<std::int32_t>> cells_;

    std::size_t cell_linear(int x, int y, int z) const {
        return static_cast<std::size_t>((z * cy_ + y) * cx_ + x);
    }
    void build();
};

}  // namespace vprune

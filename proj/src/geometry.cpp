#include "vprune/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace vprune {

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 <= 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

PolylineIndex::PolylineIndex(const std::vector<std::pair<Vec3, Vec3>>& segments, double cell_mm)
    : segments_(segments), cell_(cell_mm) {
    build();
}

PolylineIndex::PolylineIndex(const VesselTree& tree, double cell_mm)
    : segments_(tree.edges()), cell_(cell_mm) {
    // an isolated single node still occupies space; keep it as a degenerate segment
    if (segments_.empty() && tree.nodes.size() == 1)
        segments_.emplace_back(tree.nodes[0].pos, tree.nodes[0].pos);
    build();
}

void PolylineIndex::build() {
    if (segments_.empty()) return;
    Vec3 lo = segments_[0].first, hi = segments_[0].first;
    for (const auto& [a, b] : segments_) {
        lo = lo.cwiseMin(a).cwiseMin(b);
        hi = hi.cwiseMax(a).cwiseMax(b);
    }
    origin_ = lo;
    const Vec3 ext = hi - lo;
    cx_ = std::max(1, static_cast<int>(std::floor(ext.x() / cell_)) + 1);
    cy_ = std::max(1, static_cast<int>(std::floor(ext.y() / cell_)) + 1);
    cz_ = std::max(1, static_cast<int>(std::floor(ext.z() / cell_)) + 1);
    cells_.assign(static_cast<std::size_t>(cx_) * cy_ * cz_, {});
    for (std::size_t s = 0; s < segments_.size(); ++s) {
        const auto& [a, b] = segments_[s];
        const Vec3 slo = a.cwiseMin(b) - origin_;
        const Vec3 shi = a.cwiseMax(b) - origin_;
        const int x0 = std::clamp(static_cast<int>(std::floor(slo.x() / cell_)), 0, cx_ - 1);
        const int y0 = std::clamp(static_cast<int>(std::floor(slo.y() / cell_)), 0, cy_ - 1);
        const int z0 = std::clamp(static_cast<int>(std::floor(slo.z() / cell_)), 0, cz_ - 1);
        const int x1 = std::clamp(static_cast<int>(std::floor(shi.x() / cell_)), 0, cx_ - 1);
        const int y1 = std::clamp(static_cast<int>(std::floor(shi.y() / cell_)), 0, cy_ - 1);
        const int z1 = std::clamp(static_cast<int>(std::floor(shi.z() / cell_)), 0, cz_ - 1);
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    cells_[cell_linear(x, y, z)].push_back(static_cast<std::int32_t>(s));
    }
}

double PolylineIndex::nearest_distance_exhaustive(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : segments_)
        best = std::min(best, point_segment_distance(p, a, b));
    return best;
}

double PolylineIndex::nearest_distance(const Vec3& p) const {
    if (segments_.empty()) return std::numeric_limits<double>::infinity();
    const Vec3 rel = p - origin_;
    const int px = std::clamp(static_cast<int>(std::floor(rel.x() / cell_)), 0, cx_ - 1);
    const int py = std::clamp(static_cast<int>(std::floor(rel.y() / cell_)), 0, cy_ - 1);
    const int pz = std::clamp(static_cast<int>(std::floor(rel.z() / cell_)), 0, cz_ - 1);

    double best = std::numeric_limits<double>::infinity();
    for (int r = 0;; ++r) {
        // cells at Chebyshev ring >= r are at Euclidean distance >= (r-1)*cell
        // from p, so once best is under that bound no farther ring can win
        if (r > 0 && best <= static_cast<double>(r - 1) * cell_) break;
        const int x0 = std::max(0, px - r), x1 = std::min(cx_ - 1, px + r);
        const int y0 = std::max(0, py - r), y1 = std::min(cy_ - 1, py + r);
        const int z0 = std::max(0, pz - r), z1 = std::min(cz_ - 1, pz + r);
        for (int z = z0; z <= z1; ++z) {
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const int cheb = std::max({std::abs(x - px), std::abs(y - py), std::abs(z - pz)});
                    if (cheb != r) continue;  // only the shell of the ring
                    for (std::int32_t s : cells_[cell_linear(x, y, z)]) {
                        const auto& [a, b] = segments_[static_cast<std::size_t>(s)];
                        best = std::min(best, point_segment_distance(p, a, b));
                    }
                }
            }
        }
        if (x0 == 0 && y0 == 0 && z0 == 0 && x1 == cx_ - 1 && y1 == cy_ - 1 && z1 == cz_ - 1)
            break;  // whole grid scanned
    }
    return best;
}

}  // namespace vprune

#include "vprune/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "vprune/geometry.hpp"
#include "vprune/resample.hpp"
#include "vprune/rng.hpp"

namespace vprune {

namespace {

// min-distance scatter of one segment into the field, limited to voxels whose
// center can be within cutoff of the segment
void scatter_segment(ScalarVolume& field, const Vec3& a, const Vec3& b, double cutoff) {
    const Vec3 lo = a.cwiseMin(b) - Vec3::Constant(cutoff);
    const Vec3 hi = a.cwiseMax(b) + Vec3::Constant(cutoff);
    const auto& d = field.dims;
    const auto& s = field.spacing;
    const int x0 = std::max(0, static_cast<int>(std::floor(lo.x() / s.x() - 0.5)) - 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(lo.y() / s.y() - 0.5)) - 1);
    const int z0 = std::max(0, static_cast<int>(std::floor(lo.z() / s.z() - 0.5)) - 1);
    const int x1 = std::min(d.nx - 1, static_cast<int>(std::ceil(hi.x() / s.x() - 0.5)) + 1);
    const int y1 = std::min(d.ny - 1, static_cast<int>(std::ceil(hi.y() / s.y() - 0.5)) + 1);
    const int z1 = std::min(d.nz - 1, static_cast<int>(std::ceil(hi.z() / s.z() - 0.5)) + 1);
    for (int z = z0; z <= z1; ++z) {
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dist = point_segment_distance(field.voxel_center(x, y, z), a, b);
                double& cur = field.at(x, y, z);
                if (dist < cur) cur = dist;
            }
        }
    }
}

ScalarVolume distance_field_for_segments(const std::vector<std::pair<Vec3, Vec3>>& segments,
                                         GridDims dims, const Vec3& spacing, double cutoff) {
    ScalarVolume field(dims, spacing, std::numeric_limits<double>::infinity());
    for (const auto& [a, b] : segments) scatter_segment(field, a, b, cutoff);
    return field;
}

double decay_value(double dist, double alpha, double d_max) {
    return dist <= d_max ? std::exp(-alpha * dist / d_max) : 0.0;
}

}  // namespace

ScalarVolume centerline_distance_field(const VesselTree& tree, GridDims dims,
                                       const Vec3& spacing, double cutoff_mm) {
    auto segments = tree.edges();
    if (segments.empty() && tree.nodes.size() == 1)
        segments.emplace_back(tree.nodes[0].pos, tree.nodes[0].pos);
    return distance_field_for_segments(segments, dims, spacing, cutoff_mm);
}

ScalarVolume compute_heatmap(const VesselTree& tree, GridDims dims, const Vec3& spacing,
                             const HeatmapParams& hp) {
    hp.validate();
    if (tree.empty()) throw Error("compute_heatmap: empty tree");
    ScalarVolume field = centerline_distance_field(tree, dims, spacing, hp.d_max_mm);
    for (double& v : field.data) v = decay_value(v, hp.alpha, hp.d_max_mm);
    return field;
}

ScalarVolume corrupt_heatmap(const ScalarVolume& heatmap, const VesselTree& tree,
                             const HeatmapParams& hp, const CorruptParams& cp,
                             std::uint64_t seed, int* tubes_placed) {
    cp.validate();
    hp.validate();
    ScalarVolume out = heatmap;
    Rng rng(seed);
    if (tubes_placed) *tubes_placed = 0;

    const Vec3 extent(out.dims.nx * out.spacing.x(), out.dims.ny * out.spacing.y(),
                      out.dims.nz * out.spacing.z());
    PolylineIndex tree_index(tree);

    // spurious tubes: short 2-bend polylines clear of the true centerlines,
    // rendered with the same decay profile as the real heatmap
    for (int t = 0; t < cp.spurious_count; ++t) {
        std::vector<std::pair<Vec3, Vec3>> tube;
        for (int attempt = 0; attempt < 256 && tube.empty(); ++attempt) {
            const Vec3 start(rng.uniform(hp.d_max_mm, extent.x() - hp.d_max_mm),
                             rng.uniform(hp.d_max_mm, extent.y() - hp.d_max_mm),
                             rng.uniform(hp.d_max_mm, extent.z() - hp.d_max_mm));
            Vec3 dir = rng.unit_vector();
            const double bend = rng.uniform(-0.35, 0.35);
            std::vector<Vec3> pts{start};
            Vec3 cur = start;
            bool ok = true;
            const int pieces = 3;
            for (int k = 0; k < pieces; ++k) {
                if (k > 0) {
                    // small in-plane bend keeps the tube from being a perfect line
                    Vec3 ref = std::abs(dir.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
                    const Vec3 u = dir.cross(ref).normalized();
                    dir = (dir + bend * u).normalized();
                }
                cur += dir * (cp.spurious_len_mm / pieces);
                pts.push_back(cur);
            }
            for (const Vec3& p : pts) {
                if (p.x() < hp.d_max_mm || p.y() < hp.d_max_mm || p.z() < hp.d_max_mm ||
                    p.x() > extent.x() - hp.d_max_mm || p.y() > extent.y() - hp.d_max_mm ||
                    p.z() > extent.z() - hp.d_max_mm ||
                    (!tree_index.empty() && tree_index.nearest_distance(p) < cp.clearance_mm)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            for (std::size_t k = 0; k + 1 < pts.size(); ++k) tube.emplace_back(pts[k], pts[k + 1]);
        }
        if (tube.empty()) continue;  // volume too crowded for this tube
        if (tubes_placed) ++*tubes_placed;
        ScalarVolume dist = distance_field_for_segments(tube, out.dims, out.spacing, hp.d_max_mm);
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            const double add = cp.spurious_intensity * decay_value(dist.data[i], hp.alpha, hp.d_max_mm);
            if (add > 0.0) out.data[i] += add;
        }
    }

    // dropout balls centered on centerline points
    if (cp.dropout_count > 0 && !tree.empty()) {
        const VesselTree fine = resample_polyline(tree, 0.5);
        for (int b = 0; b < cp.dropout_count; ++b) {
            const Vec3 c = fine.nodes[static_cast<std::size_t>(rng.below(fine.nodes.size()))].pos;
            const auto& s = out.spacing;
            const double r = cp.dropout_radius_mm;
            const int x0 = std::max(0, static_cast<int>(std::floor((c.x() - r) / s.x() - 0.5)));
            const int y0 = std::max(0, static_cast<int>(std::floor((c.y() - r) / s.y() - 0.5)));
            const int z0 = std::max(0, static_cast<int>(std::floor((c.z() - r) / s.z() - 0.5)));
            const int x1 = std::min(out.dims.nx - 1, static_cast<int>(std::ceil((c.x() + r) / s.x() - 0.5)));
            const int y1 = std::min(out.dims.ny - 1, static_cast<int>(std::ceil((c.y() + r) / s.y() - 0.5)));
            const int z1 = std::min(out.dims.nz - 1, static_cast<int>(std::ceil((c.z() + r) / s.z() - 0.5)));
            for (int z = z0; z <= z1; ++z)
                for (int y = y0; y <= y1; ++y)
                    for (int x = x0; x <= x1; ++x)
                        if ((out.voxel_center(x, y, z) - c).norm() <= r) out.at(x, y, z) = 0.0;
        }
    }

    if (cp.noise_sigma > 0.0)
        for (double& v : out.data) v += cp.noise_sigma * rng.normal();

    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

}  // namespace vprune

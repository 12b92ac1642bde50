#include "vprune/synth.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "vprune/rng.hpp"

namespace vprune {

namespace {

constexpr int kMaxDirectionTries = 32;
constexpr double kPi = 3.14159265358979323846;

struct Box {
    Vec3 lo, hi;
    bool contains(const Vec3& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
};

// direction tilted away from `axis` by `angle_rad` at a random azimuth
Vec3 tilted_direction(const Vec3& axis, double angle_rad, double azimuth_rad) {
    Vec3 ref = std::abs(axis.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
    const Vec3 u = axis.cross(ref).normalized();
    const Vec3 v = axis.cross(u);
    return (std::cos(angle_rad) * axis +
            std::sin(angle_rad) * (std::cos(azimuth_rad) * u + std::sin(azimuth_rad) * v))
        .normalized();
}

struct Grower {
    const SynthParams& p;
    Box box;
    Rng rng;
    VesselTree tree;
    long long next_id = 1;

    long long add_node(const Vec3& pos, double radius, long long parent) {
        VesselNode n;
        n.id = next_id++;
        n.kind = 2;
        n.pos = pos;
        n.radius = radius;
        n.parent = parent;
        tree.nodes.push_back(n);
        return n.id;
    }

    void grow(const Vec3& tip, const Vec3& dir, double radius, long long tip_id, int level) {
        if (level > p.depth) return;
        const int n_children = level == 0 ? 1 : 2;
        for (int c = 0; c < n_children; ++c) {
            const double len = rng.uniform(p.branch_len_min_mm, p.branch_len_max_mm);
            const double angle =
                rng.uniform(p.branch_angle_min_deg, p.branch_angle_max_deg) * kPi / 180.0;
            Vec3 d;
            bool placed = false;
            for (int attempt = 0; attempt < kMaxDirectionTries; ++attempt) {
                d = level == 0 && attempt < kMaxDirectionTries / 2
                        ? rng.unit_vector()
                        : tilted_direction(dir, angle, rng.uniform(0.0, 2.0 * kPi));
                if (box.contains(tip + len * d)) {
                    placed = true;
                    break;
                }
            }
            if (!placed) continue;  // drop this child; the box has no room for it
            const Vec3 end = tip + len * d;
            const long long end_id = add_node(end, radius, tip_id);
            grow(end, d, radius * p.radius_decay, end_id, level + 1);
        }
    }
};

}  // namespace

void SynthParams::validate() const {
    if (n_trees <= 0) throw ConfigError("synth.n_trees: must be positive");
    if (depth < 0) throw ConfigError("synth.depth: must be >= 0");
    if (!(branch_len_min_mm > 0.0) || branch_len_max_mm < branch_len_min_mm)
        throw ConfigError("synth.branch_len range: need 0 < min <= max");
    if (branch_angle_min_deg < 0.0 || branch_angle_max_deg < branch_angle_min_deg)
        throw ConfigError("synth.branch_angle range: need 0 <= min <= max");
    if (!(radius_root_mm > 0.0)) throw ConfigError("synth.radius_root_mm: must be positive");
    if (!(radius_decay > 0.0) || radius_decay > 1.0)
        throw ConfigError("synth.radius_decay: must be in (0,1]");
    if (!(margin_mm >= 0.0)) throw ConfigError("synth.margin_mm: must be >= 0");
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
        throw ConfigError("synth.dims: must be positive");
    if (!(spacing.x() > 0 && spacing.y() > 0 && spacing.z() > 0))
        throw ConfigError("synth.spacing_mm: must be positive");
}

VesselTree generate_forest(const SynthParams& params) {
    params.validate();
    const Vec3 extent(params.dims.nx * params.spacing.x(), params.dims.ny * params.spacing.y(),
                      params.dims.nz * params.spacing.z());
    const Box box{Vec3::Constant(params.margin_mm).eval(),
                  (extent - Vec3::Constant(params.margin_mm)).eval()};
    if ((box.hi - box.lo).minCoeff() <= params.branch_len_min_mm)
        throw ConfigError("synth: volume too small for margin_mm and branch lengths");

    Grower g{params, box, Rng(params.rng_seed), {}, 1};
    for (int t = 0; t < params.n_trees; ++t) {
        const Vec3 root(g.rng.uniform(box.lo.x(), box.hi.x()),
                        g.rng.uniform(box.lo.y(), box.hi.y()),
                        g.rng.uniform(box.lo.z(), box.hi.z()));
        const long long root_id = g.add_node(root, params.radius_root_mm, -1);
        g.grow(root, g.rng.unit_vector(), params.radius_root_mm, root_id, 0);
    }
    g.tree.validate();
    return g.tree;
}

}  // namespace vprune

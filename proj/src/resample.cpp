#include "vprune/resample.hpp"

#include <cmath>
#include <unordered_map>

namespace vprune {

VesselTree resample_polyline(const VesselTree& tree, double step_mm) {
    if (!(step_mm > 0.0)) throw Error("resample_polyline: step must be positive");

    std::unordered_map<long long, std::size_t> by_id;
    by_id.reserve(tree.nodes.size());
    long long next_id = 0;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        by_id.emplace(tree.nodes[i].id, i);
        next_id = std::max(next_id, tree.nodes[i].id);
    }
    ++next_id;

    VesselTree out;
    out.nodes.reserve(tree.nodes.size());
    for (const auto& n : tree.nodes) {
        if (n.parent == -1) {
            out.nodes.push_back(n);
            continue;
        }
        const auto& p = tree.nodes.at(by_id.at(n.parent));
        const double len = (n.pos - p.pos).norm();
        const int pieces = std::max(1, static_cast<int>(std::ceil(len / step_mm - 1e-12)));
        long long prev = n.parent;
        for (int k = 1; k < pieces; ++k) {
            const double t = static_cast<double>(k) / pieces;
            VesselNode mid;
            mid.id = next_id++;
            mid.kind = n.kind;
            mid.pos = p.pos + t * (n.pos - p.pos);
            mid.radius = p.radius + t * (n.radius - p.radius);
            mid.parent = prev;
            out.nodes.push_back(mid);
            prev = mid.id;
        }
        VesselNode leaf = n;
        leaf.parent = prev;
        out.nodes.push_back(leaf);
    }
    return out;
}

}  // namespace vprune

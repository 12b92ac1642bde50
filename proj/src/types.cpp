#include "vprune/types.hpp"

#include <cmath>
#include <unordered_map>

namespace vprune {

std::ptrdiff_t VesselTree::index_of(long long id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return static_cast<std::ptrdiff_t>(i);
    return -1;
}

void VesselTree::validate() const {
    std::unordered_map<long long, std::size_t> by_id;
    by_id.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        if (n.id <= 0)
            throw StructureError("node id must be positive, got " + std::to_string(n.id));
        if (!by_id.emplace(n.id, i).second)
            throw StructureError("duplicate node id " + std::to_string(n.id));
    }
    for (const auto& n : nodes) {
        if (n.parent == -1) continue;
        auto it = by_id.find(n.parent);
        if (it == by_id.end())
            throw StructureError("node " + std::to_string(n.id) + " references missing parent " +
                                 std::to_string(n.parent));
        const auto& p = nodes[it->second];
        const double d = (n.pos - p.pos).norm();
        if (!(d > 0.0) || !std::isfinite(d))
            throw StructureError("degenerate edge at node " + std::to_string(n.id));
    }
    // cycle check: walk parent chains with per-walk marking
    std::vector<int> mark(nodes.size(), 0);
    int stamp = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (mark[i] != 0) continue;
        ++stamp;
        std::size_t cur = i;
        for (;;) {
            if (mark[cur] == stamp)
                throw StructureError("cycle through node " + std::to_string(nodes[cur].id));
            if (mark[cur] != 0) break;  // joins an already-verified chain
            mark[cur] = stamp;
            if (nodes[cur].parent == -1) break;
            cur = by_id.at(nodes[cur].parent);
        }
    }
}

double VesselTree::total_length() const {
    std::unordered_map<long long, std::size_t> by_id;
    by_id.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) by_id.emplace(nodes[i].id, i);
    double sum = 0.0;
    for (const auto& n : nodes) {
        if (n.parent == -1) continue;
        sum += (n.pos - nodes.at(by_id.at(n.parent)).pos).norm();
    }
    return sum;
}

std::vector<std::pair<Vec3, Vec3>> VesselTree::edges() const {
    std::unordered_map<long long, std::size_t> by_id;
    by_id.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) by_id.emplace(nodes[i].id, i);
    std::vector<std::pair<Vec3, Vec3>> out;
    out.reserve(nodes.size());
    for (const auto& n : nodes) {
        if (n.parent == -1) continue;
        out.emplace_back(n.pos, nodes.at(by_id.at(n.parent)).pos);
    }
    return out;
}

std::vector<std::size_t> VesselTree::root_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].parent == -1) out.push_back(i);
    return out;
}

void FeatureStack::validate() const {
    if (layers.empty()) throw Error("FeatureStack: no layers");
    for (const auto& l : layers) {
        if (!(l.dims == layers.front().dims) || l.spacing != layers.front().spacing)
            throw Error("FeatureStack: layers disagree on dims/spacing");
    }
}

}  // namespace vprune

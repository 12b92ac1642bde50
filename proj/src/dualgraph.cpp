#include "vprune/dualgraph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "vprune/geometry.hpp"

namespace vprune {

std::vector<int> SegmentSet::segments_of_node(long long node_id) const {
    std::vector<int> out;
    for (const auto& s : segments)
        if (std::find(s.node_ids.begin(), s.node_ids.end(), node_id) != s.node_ids.end())
            out.push_back(s.id);
    return out;
}

namespace {

struct ForestView {
    const VesselTree& tree;
    std::unordered_map<long long, std::size_t> by_id;
    std::vector<std::vector<std::size_t>> children;  // indices, in node order

    explicit ForestView(const VesselTree& t) : tree(t), children(t.nodes.size()) {
        by_id.reserve(t.nodes.size());
        for (std::size_t i = 0; i < t.nodes.size(); ++i) by_id.emplace(t.nodes[i].id, i);
        for (std::size_t i = 0; i < t.nodes.size(); ++i) {
            const auto& n = t.nodes[i];
            if (n.parent != -1) children[by_id.at(n.parent)].push_back(i);
        }
    }

    bool is_critical(std::size_t i) const {
        const auto& n = tree.nodes[i];
        if (n.parent == -1) return true;               // root
        return children[i].size() != 1;                // tip or bifurcation
    }
};

void cut_path(const std::vector<std::size_t>& path, const VesselTree& tree,
              double sampling_length, std::vector<Segment>& out) {
    // greedy proximal-to-distal cutting at nodes; each piece gets >= 1 edge
    std::size_t start = 0;
    while (start + 1 < path.size()) {
        Segment seg;
        seg.node_ids.push_back(tree.nodes[path[start]].id);
        seg.points.push_back(tree.nodes[path[start]].pos);
        double acc = 0.0;
        std::size_t i = start;
        while (i + 1 < path.size()) {
            const double d =
                (tree.nodes[path[i + 1]].pos - tree.nodes[path[i]].pos).norm();
            if (!seg.node_ids.empty() && seg.node_ids.size() >= 2 &&
                acc + d > sampling_length + 1e-9)
                break;
            acc += d;
            ++i;
            seg.node_ids.push_back(tree.nodes[path[i]].id);
            seg.points.push_back(tree.nodes[path[i]].pos);
        }
        seg.length = acc;
        out.push_back(std::move(seg));
        start = i;
    }
}


void gaussian_blur_axis(ScalarVolume& vol, int axis, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
        sum += kernel[static_cast<std::size_t>(k + radius)];
    }
    for (double& w : kernel) w /= sum;

    const auto& d = vol.dims;
    const int lim[3] = {d.nx, d.ny, d.nz};
    const std::int64_t stride[3] = {1, d.nx, static_cast<std::int64_t>(d.nx) * d.ny};
    std::vector<double> line(static_cast<std::size_t>(lim[axis]));
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (int j = 0; j < lim[a2]; ++j) {
        for (int i = 0; i < lim[a1]; ++i) {
            const std::int64_t base = i * stride[a1] + j * stride[a2];
            for (int k = 0; k < lim[axis]; ++k) line[static_cast<std::size_t>(k)] = vol.at(base + k * stride[axis]);
            for (int k = 0; k < lim[axis]; ++k) {
                double acc = 0.0;
                for (int o = -radius; o <= radius; ++o) {
                    const int kk = std::clamp(k + o, 0, lim[axis] - 1);  // replicate border
                    acc += kernel[static_cast<std::size_t>(o + radius)] * line[static_cast<std::size_t>(kk)];
                }
                vol.at(base + k * stride[axis]) = acc;
            }
        }
    }
}

ScalarVolume gaussian_blur(const ScalarVolume& vol, double sigma) {
    ScalarVolume out = vol;
    for (int axis = 0; axis < 3; ++axis) gaussian_blur_axis(out, axis, sigma);
    return out;
}

ScalarVolume gradient_magnitude_rescaled(const ScalarVolume& vol) {
    ScalarVolume out(vol.dims, vol.spacing, 0.0);
    const auto& d = vol.dims;
    double maxg = 0.0;
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                auto diff = [&](int a) {
                    const int c[3] = {x, y, z};
                    const int lim[3] = {d.nx, d.ny, d.nz};
                    int lo = c[a] - 1, hi = c[a] + 1;
                    lo = std::max(lo, 0);
                    hi = std::min(hi, lim[a] - 1);
                    int ca_lo[3] = {x, y, z}, ca_hi[3] = {x, y, z};
                    ca_lo[a] = lo;
                    ca_hi[a] = hi;
                    const double span = (hi - lo) * vol.spacing[a];
                    if (span <= 0.0) return 0.0;
                    return (vol.at(ca_hi[0], ca_hi[1], ca_hi[2]) -
                            vol.at(ca_lo[0], ca_lo[1], ca_lo[2])) /
                           span;
                };
                const double gx = diff(0), gy = diff(1), gz = diff(2);
                const double g = std::sqrt(gx * gx + gy * gy + gz * gz);
                out.at(x, y, z) = g;
                maxg = std::max(maxg, g);
            }
        }
    }
    if (maxg > 0.0)
        for (double& v : out.data) v /= maxg;
    return out;
}

}  // namespace

SegmentSet segment_branches(const VesselTree& forest, double sampling_length_mm) {
    if (!(sampling_length_mm > 0.0))
        throw Error("segment_branches: sampling length must be positive");
    SegmentSet set;
    if (forest.empty()) return set;

    const ForestView view(forest);

    // maximal degree-2 paths from each critical node down to the next critical node
    for (std::size_t i = 0; i < forest.nodes.size(); ++i) {
        if (!view.is_critical(i)) continue;
        for (std::size_t child : view.children[i]) {
            std::vector<std::size_t> path{i, child};
            std::size_t cur = child;
            while (!view.is_critical(cur)) {
                cur = view.children[cur][0];
                path.push_back(cur);
            }
            cut_path(path, forest, sampling_length_mm, set.segments);
        }
        // isolated single node: keep it as a degenerate segment
        if (forest.nodes[i].parent == -1 && view.children[i].empty()) {
            Segment seg;
            seg.node_ids.push_back(forest.nodes[i].id);
            seg.points.push_back(forest.nodes[i].pos);
            seg.length = 0.0;
            set.segments.push_back(std::move(seg));
        }
    }
    for (std::size_t k = 0; k < set.segments.size(); ++k)
        set.segments[k].id = static_cast<int>(k);
    return set;
}

DualGraph build_dual(const SegmentSet& segments) {
    DualGraph g;
    g.n = static_cast<int>(segments.segments.size());
    std::map<long long, std::vector<int>> by_endpoint;
    for (const auto& s : segments.segments) {
        g.node_ids.push_back(s.node_ids);
        g.lengths.push_back(s.length);
        if (s.node_ids.empty()) continue;
        by_endpoint[s.node_ids.front()].push_back(s.id);
        if (s.node_ids.size() > 1) by_endpoint[s.node_ids.back()].push_back(s.id);
    }
    std::set<std::pair<int, int>> edges;
    for (const auto& [node, segs] : by_endpoint)
        for (std::size_t a = 0; a < segs.size(); ++a)
            for (std::size_t b = a + 1; b < segs.size(); ++b)
                if (segs[a] != segs[b])
                    edges.emplace(std::min(segs[a], segs[b]), std::max(segs[a], segs[b]));
    g.edges.assign(edges.begin(), edges.end());
    return g;
}

FeatureStack build_feature_volumes(const ScalarVolume& heatmap) {
    FeatureStack stack;
    stack.layers.push_back(heatmap);
    stack.layers.push_back(gaussian_blur(heatmap, 1.0));
    stack.layers.push_back(gaussian_blur(heatmap, 2.0));
    stack.layers.push_back(gradient_magnitude_rescaled(stack.layers[1]));
    stack.channel_names = {"heatmap", "smooth_s1", "smooth_s2", "gradmag_s1"};
    return stack;
}

namespace {

double neighborhood_mean(const ScalarVolume& vol, const Vec3& p) {
    const auto c = vol.clamped_voxel(p);
    double sum = 0.0;
    int count = 0;
    for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int x = std::clamp(c[0] + dx, 0, vol.dims.nx - 1);
                const int y = std::clamp(c[1] + dy, 0, vol.dims.ny - 1);
                const int z = std::clamp(c[2] + dz, 0, vol.dims.nz - 1);
                sum += vol.at(x, y, z);
                ++count;
            }
        }
    }
    return sum / count;
}

}  // namespace

std::vector<std::vector<double>> aggregate_features(const SegmentSet& segments,
                                                    const FeatureStack& stack) {
    stack.validate();
    std::vector<std::vector<double>> out;
    out.reserve(segments.segments.size());
    std::vector<double> means;
    for (const auto& s : segments.segments) {
        if (s.points.empty()) throw Error("aggregate_features: empty segment");
        std::vector<double> feat;
        feat.reserve(stack.layers.size());
        for (const auto& layer : stack.layers) {
            means.clear();
            for (const auto& p : s.points) means.push_back(neighborhood_mean(layer, p));
            // value-sorted summation makes the mean independent of node order
            std::sort(means.begin(), means.end());
            double acc = 0.0;
            for (double m : means) acc += m;
            feat.push_back(acc / static_cast<double>(s.points.size()));
        }
        out.push_back(std::move(feat));
    }
    return out;
}

std::vector<double> label_targets(const SegmentSet& segments, const VesselTree& gt_resampled,
                                  double nmd_mm) {
    if (!(nmd_mm > 0.0)) throw Error("label_targets: nmd must be positive");
    std::vector<double> out;
    out.reserve(segments.segments.size());
    if (gt_resampled.empty()) {
        out.assign(segments.segments.size(), 0.0);
        return out;
    }
    const PolylineIndex index(gt_resampled);
    for (const auto& s : segments.segments) {
        int matched = 0;
        for (const auto& p : s.points)
            if (index.nearest_distance(p) <= nmd_mm) ++matched;
        out.push_back(static_cast<double>(matched) / static_cast<double>(s.points.size()));
    }
    return out;
}

std::string dualgraph_to_json(const DualGraph& g) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (int i = 0; i < g.n; ++i) {
        nlohmann::json node;
        node["id"] = i;
        node["segment_node_ids"] = g.node_ids.at(static_cast<std::size_t>(i));
        node["length"] = g.lengths.at(static_cast<std::size_t>(i));
        node["feature"] = g.features.empty() ? std::vector<double>{}
                                             : g.features.at(static_cast<std::size_t>(i));
        if (!g.targets.empty()) node["target"] = g.targets.at(static_cast<std::size_t>(i));
        if (!g.scores.empty()) node["score"] = g.scores.at(static_cast<std::size_t>(i));
        j["nodes"].push_back(std::move(node));
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& [a, b] : g.edges) j["edges"].push_back({a, b});
    return j.dump(2) + "\n";
}

DualGraph dualgraph_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dualgraph json: ") + e.what());
    }
    DualGraph g;
    try {
        const auto& nodes = j.at("nodes");
        g.n = static_cast<int>(nodes.size());
        bool any_target = false, any_score = false;
        for (const auto& node : nodes) {
            g.node_ids.push_back(node.at("segment_node_ids").get<std::vector<long long>>());
            g.lengths.push_back(node.at("length").get<double>());
            g.features.push_back(node.at("feature").get<std::vector<double>>());
            if (node.contains("target")) any_target = true;
            if (node.contains("score")) any_score = true;
        }
        if (any_target)
            for (const auto& node : nodes) g.targets.push_back(node.at("target").get<double>());
        if (any_score)
            for (const auto& node : nodes) g.scores.push_back(node.at("score").get<double>());
        for (const auto& e : j.at("edges"))
            g.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dualgraph json: ") + e.what());
    }
    return g;
}

}  // namespace vprune

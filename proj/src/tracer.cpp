#include "vprune/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

#include <Eigen/Geometry>

namespace vprune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSpeedEps = 1e-4;

std::vector<std::array<int, 3>> ball_offsets(double radius) {
    std::vector<std::array<int, 3>> out;
    const int r = static_cast<int>(std::floor(radius));
    for (int z = -r; z <= r; ++z)
        for (int y = -r; y <= r; ++y)
            for (int x = -r; x <= r; ++x)
                if (x * x + y * y + z * z <= radius * radius) out.push_back({x, y, z});
    return out;
}

struct UnionFind {
    std::vector<std::int32_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::int32_t>(i);
    }
    std::int32_t find(std::int32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

// local eikonal update from the accepted per-axis minima
double eikonal_solve(const double axis_val[3], const double axis_h[3], double inv_speed) {
    struct Term {
        double t, h;
    };
    Term terms[3];
    int m = 0;
    for (int a = 0; a < 3; ++a)
        if (axis_val[a] < kInf) terms[m++] = {axis_val[a], axis_h[a]};
    if (m == 0) return kInf;
    std::sort(terms, terms + m, [](const Term& x, const Term& y) { return x.t < y.t; });

    double result = terms[0].t + terms[0].h * inv_speed;
    for (int k = 2; k <= m; ++k) {
        if (result <= terms[k - 1].t) break;  // causality: farther axes cannot contribute
        double A = 0, B = 0, C = -inv_speed * inv_speed;
        for (int i = 0; i < k; ++i) {
            const double w = 1.0 / (terms[i].h * terms[i].h);
            A += w;
            B += terms[i].t * w;
            C += terms[i].t * terms[i].t * w;
        }
        const double disc = B * B - A * C;
        if (disc < 0) break;
        result = (B + std::sqrt(disc)) / A;
    }
    return result;
}

}  // namespace

void TracerParams::validate() const {
    if (!(binarize_threshold > 0.0) || binarize_threshold >= 1.0)
        throw ConfigError("tracer.binarize_threshold: must be in (0,1)");
    if (dilation_radius_vox < 0.0) throw ConfigError("tracer.dilation_radius_vox: must be >= 0");
    if (min_component_voxels < 1) throw ConfigError("tracer.min_component_voxels: must be >= 1");
    if (!(coverage_stop > 0.0) || coverage_stop > 1.0)
        throw ConfigError("tracer.coverage_stop: must be in (0,1]");
    if (!(min_branch_len_mm > 0.0)) throw ConfigError("tracer.min_branch_len_mm: must be positive");
    if (!(step_size_mm > 0.0)) throw ConfigError("tracer.step_size_mm: must be positive");
}

ScalarVolume binarize_dilate(const ScalarVolume& heatmap, const TracerParams& params) {
    params.validate();
    ScalarVolume mask(heatmap.dims, heatmap.spacing, 0.0);
    const auto offsets = ball_offsets(params.dilation_radius_vox);
    const auto& d = heatmap.dims;
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                if (heatmap.at(x, y, z) < params.binarize_threshold) continue;
                for (const auto& o : offsets) {
                    const int ox = x + o[0], oy = y + o[1], oz = z + o[2];
                    if (d.contains(ox, oy, oz)) mask.at(ox, oy, oz) = 1.0;
                }
            }
        }
    }
    return mask;
}

std::vector<std::vector<std::int64_t>> connected_components(const ScalarVolume& mask,
                                                            int min_component_voxels) {
    // two-pass union-find over the 13 already-scanned neighbors
    const auto& d = mask.dims;
    const std::int64_t n = d.count();
    std::vector<std::int32_t> label(static_cast<std::size_t>(n), -1);
    std::vector<std::int64_t> fg;
    for (std::int64_t i = 0; i < n; ++i)
        if (mask.at(i) != 0.0) {
            label[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(fg.size());
            fg.push_back(i);
        }
    UnionFind uf(fg.size());
    static const std::array<std::array<int, 3>, 13> prior = {{{-1, -1, -1},
                                                              {0, -1, -1},
                                                              {1, -1, -1},
                                                              {-1, 0, -1},
                                                              {0, 0, -1},
                                                              {1, 0, -1},
                                                              {-1, 1, -1},
                                                              {0, 1, -1},
                                                              {1, 1, -1},
                                                              {-1, -1, 0},
                                                              {0, -1, 0},
                                                              {1, -1, 0},
                                                              {-1, 0, 0}}};
    for (std::size_t f = 0; f < fg.size(); ++f) {
        const auto v = d.unlinear(fg[f]);
        for (const auto& o : prior) {
            const int x = v[0] + o[0], y = v[1] + o[1], z = v[2] + o[2];
            if (!d.contains(x, y, z)) continue;
            const std::int32_t l = label[static_cast<std::size_t>(d.linear(x, y, z))];
            if (l >= 0) uf.unite(static_cast<std::int32_t>(f), l);
        }
    }
    std::unordered_map<std::int32_t, std::size_t> root_to_comp;
    std::vector<std::vector<std::int64_t>> comps;
    for (std::size_t f = 0; f < fg.size(); ++f) {
        const std::int32_t r = uf.find(static_cast<std::int32_t>(f));
        auto [it, inserted] = root_to_comp.emplace(r, comps.size());
        if (inserted) comps.emplace_back();
        comps[it->second].push_back(fg[f]);
    }
    std::erase_if(comps, [&](const auto& c) {
        return c.size() < static_cast<std::size_t>(min_component_voxels);
    });
    // voxel lists are already ascending (raster order); order components by
    // decreasing size, ties by lowest contained index
    std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.front() < b.front();
    });
    return comps;
}

TimeField fast_march(const ScalarVolume& heatmap, const std::vector<std::int64_t>& component,
                     std::int64_t source) {
    const auto& d = heatmap.dims;
    TimeField tf{ScalarVolume(d, heatmap.spacing, kInf), source};
    enum : std::uint8_t { kOutside = 0, kFar, kNarrow, kAccepted };
    std::vector<std::uint8_t> state(static_cast<std::size_t>(d.count()), kOutside);
    for (std::int64_t v : component) state[static_cast<std::size_t>(v)] = kFar;
    if (source < 0 || state[static_cast<std::size_t>(source)] == kOutside)
        throw Error("fast_march: source outside component");

    const double hx = heatmap.spacing.x(), hy = heatmap.spacing.y(), hz = heatmap.spacing.z();
    const double h[3] = {hx, hy, hz};
    auto& T = tf.times;

    using Entry = std::pair<double, std::int64_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
    T.at(source) = 0.0;
    state[static_cast<std::size_t>(source)] = kNarrow;
    heap.emplace(0.0, source);

    const std::int64_t stride[3] = {1, d.nx, static_cast<std::int64_t>(d.nx) * d.ny};

    while (!heap.empty()) {
        const auto [t, v] = heap.top();
        heap.pop();
        auto& st = state[static_cast<std::size_t>(v)];
        if (st == kAccepted || t != T.at(v)) continue;  // stale entry
        st = kAccepted;

        const auto vc = d.unlinear(v);
        const int coord[3] = {vc[0], vc[1], vc[2]};
        const int lim[3] = {d.nx, d.ny, d.nz};
        for (int axis = 0; axis < 3; ++axis) {
            for (int dir = -1; dir <= 1; dir += 2) {
                const int c = coord[axis] + dir;
                if (c < 0 || c >= lim[axis]) continue;
                const std::int64_t nb = v + dir * stride[axis];
                auto& nst = state[static_cast<std::size_t>(nb)];
                if (nst == kOutside || nst == kAccepted) continue;

                // per-axis minimum over accepted face neighbors of nb
                const auto nc = d.unlinear(nb);
                const int ncoord[3] = {nc[0], nc[1], nc[2]};
                double axis_val[3] = {kInf, kInf, kInf};
                for (int a = 0; a < 3; ++a) {
                    for (int dd = -1; dd <= 1; dd += 2) {
                        const int cc = ncoord[a] + dd;
                        if (cc < 0 || cc >= lim[a]) continue;
                        const std::int64_t nn = nb + dd * stride[a];
                        if (state[static_cast<std::size_t>(nn)] == kAccepted)
                            axis_val[a] = std::min(axis_val[a], T.at(nn));
                    }
                }
                const double speed_v = heatmap.at(nb) + kSpeedEps;
                const double cand = eikonal_solve(axis_val, h, 1.0 / (speed_v * speed_v));
                if (cand < T.at(nb)) {
                    T.at(nb) = cand;
                    nst = kNarrow;
                    heap.emplace(cand, nb);
                }
            }
        }
    }
    return tf;
}

namespace {

struct ComponentTracer {
    const ScalarVolume& heat;
    const TracerParams& params;
    const std::vector<std::int64_t>& comp;
    const GridDims d;
    std::vector<std::uint8_t> in_comp;
    std::vector<std::uint8_t> visited;
    std::size_t visited_count = 0;
    TimeField tf;
    std::unordered_map<std::int64_t, long long> node_at_voxel;
    VesselTree tree;
    long long next_id = 1;
    double min_spacing;
    double max_spacing;

    ComponentTracer(const ScalarVolume& h, const std::vector<std::int64_t>& c,
                    const TracerParams& p)
        : heat(h),
          params(p),
          comp(c),
          d(h.dims),
          in_comp(static_cast<std::size_t>(h.dims.count()), 0),
          visited(static_cast<std::size_t>(h.dims.count()), 0) {
        for (std::int64_t v : comp) in_comp[static_cast<std::size_t>(v)] = 1;
        min_spacing = h.spacing.minCoeff();
        max_spacing = h.spacing.maxCoeff();
    }

    std::int64_t pick_source() const {
        std::int64_t best = comp.front();
        double best_val = -1.0;
        for (std::int64_t v : comp) {
            const double h = heat.at(v);
            if (h > best_val) {  // ties keep the lowest index (comp is ascending)
                best_val = h;
                best = v;
            }
        }
        return best;
    }

    void mark_visited_ball(const Vec3& center, double radius_mm) {
        const auto& s = heat.spacing;
        const double r = radius_mm;
        const int x0 = std::max(0, static_cast<int>(std::floor((center.x() - r) / s.x() - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor((center.y() - r) / s.y() - 0.5)));
        const int z0 = std::max(0, static_cast<int>(std::floor((center.z() - r) / s.z() - 0.5)));
        const int x1 = std::min(d.nx - 1, static_cast<int>(std::ceil((center.x() + r) / s.x() - 0.5)));
        const int y1 = std::min(d.ny - 1, static_cast<int>(std::ceil((center.y() + r) / s.y() - 0.5)));
        const int z1 = std::min(d.nz - 1, static_cast<int>(std::ceil((center.z() + r) / s.z() - 0.5)));
        for (int z = z0; z <= z1; ++z) {
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const std::int64_t li = d.linear(x, y, z);
                    if (!in_comp[static_cast<std::size_t>(li)] ||
                        visited[static_cast<std::size_t>(li)])
                        continue;
                    if ((heat.voxel_center(x, y, z) - center).norm() <= r) {
                        visited[static_cast<std::size_t>(li)] = 1;
                        ++visited_count;
                    }
                }
            }
        }
    }

    void mark_visited_voxel(std::int64_t v) {
        if (!visited[static_cast<std::size_t>(v)]) {
            visited[static_cast<std::size_t>(v)] = 1;
            ++visited_count;
        }
    }

    // steepest-descent step on the 26-neighborhood; -1 when trapped
    std::int64_t descend_step(std::int64_t v) const {
        const auto vc = d.unlinear(v);
        const double tv = tf.times.at(v);
        std::int64_t best = -1;
        double best_t = tv;
        for (int dz = -1; dz <= 1; ++dz) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0 && dz == 0) continue;
                    const int x = vc[0] + dx, y = vc[1] + dy, z = vc[2] + dz;
                    if (!d.contains(x, y, z)) continue;
                    const std::int64_t nb = d.linear(x, y, z);
                    if (!in_comp[static_cast<std::size_t>(nb)]) continue;
                    // neighbors are enumerated in ascending linear order, so a
                    // strict < keeps the lowest index on ties
                    const double tn = tf.times.at(nb);
                    if (tn < tv && tn < best_t) {
                        best_t = tn;
                        best = nb;
                    }
                }
            }
        }
        return best;
    }

    double estimate_radius(const Vec3& pos, const Vec3& tangent) const {
        Vec3 t = tangent.norm() > 1e-12 ? tangent.normalized() : Vec3(1, 0, 0);
        Vec3 ref = std::abs(t.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
        const Vec3 n1 = t.cross(ref).normalized();
        const Vec3 n2 = t.cross(n1).normalized();
        const double step = 0.25 * min_spacing;
        const double reach = 8.0 * max_spacing;
        double sum = 0.0;
        int rays = 0;
        const Vec3 dirs[4] = {n1, -n1, n2, -n2};
        for (const Vec3& dir : dirs) {
            double r = step;
            for (; r <= reach; r += step) {
                const Vec3 q = pos + r * dir;
                const auto cv = q.cwiseQuotient(heat.spacing);
                const int x = static_cast<int>(std::floor(cv.x()));
                const int y = static_cast<int>(std::floor(cv.y()));
                const int z = static_cast<int>(std::floor(cv.z()));
                if (!d.contains(x, y, z) || heat.at(x, y, z) < params.binarize_threshold) break;
            }
            sum += r - step;  // last radius still above threshold
            ++rays;
        }
        return std::max(sum / rays, 0.5 * min_spacing);
    }

    // Subdivide the hop a->b into pieces of length <= step_size. An odd piece
    // count keeps interpolated points off exact cell boundaries, so every
    // emitted node stays inside the mask.
    void emit_hop_nodes(const Vec3& a, const Vec3& b, const Vec3& tangent,
                        std::vector<VesselNode>& out) const {
        const double len = (b - a).norm();
        int pieces = std::max(1, static_cast<int>(std::ceil(len / params.step_size_mm - 1e-12)));
        if (pieces % 2 == 0) ++pieces;
        for (int k = 1; k < pieces; ++k) {
            const double t = static_cast<double>(k) / pieces;
            VesselNode n;
            n.pos = a + t * (b - a);
            n.radius = estimate_radius(n.pos, tangent);
            out.push_back(n);
        }
    }

    // traced voxel 26-adjacent to v with the smallest arrival time, or -1
    std::int64_t adjacent_traced(std::int64_t v) const {
        const auto vc = d.unlinear(v);
        std::int64_t best = -1;
        double best_t = std::numeric_limits<double>::infinity();
        for (int dz = -1; dz <= 1; ++dz) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0 && dz == 0) continue;
                    const int x = vc[0] + dx, y = vc[1] + dy, z = vc[2] + dz;
                    if (!d.contains(x, y, z)) continue;
                    const std::int64_t nb = d.linear(x, y, z);
                    if (!node_at_voxel.count(nb)) continue;
                    const double tn = tf.times.at(nb);
                    if (tn < best_t) {  // ascending enumeration keeps lowest index on ties
                        best_t = tn;
                        best = nb;
                    }
                }
            }
        }
        return best;
    }

    // trace one branch from seed; returns false when the branch was abandoned
    // (trapped descent)
    bool trace_branch(std::int64_t seed, bool& accepted, double& branch_len) {
        accepted = false;
        branch_len = 0.0;
        std::vector<std::int64_t> path{seed};
        std::int64_t cur = seed;
        bool reached = false;
        while (true) {
            if (cur != seed) {
                if (node_at_voxel.count(cur) || cur == tf.source) {
                    reached = true;
                    break;
                }
                // attach as soon as the descent touches the traced tree
                const std::int64_t att = adjacent_traced(cur);
                if (att >= 0) {
                    branch_len += (heat.voxel_center(att) - heat.voxel_center(cur)).norm();
                    path.push_back(att);
                    reached = true;
                    break;
                }
            }
            const std::int64_t nxt = descend_step(cur);
            if (nxt < 0) break;  // trapped
            branch_len += (heat.voxel_center(nxt) - heat.voxel_center(cur)).norm();
            cur = nxt;
            path.push_back(cur);
        }
        if (!reached) {
            mark_visited_voxel(seed);
            return false;
        }
        accepted = branch_len >= params.min_branch_len_mm;
        if (!accepted) return true;

        // endpoint must be an existing node; create the source root on demand
        const std::int64_t endpoint = path.back();
        long long parent_id;
        if (auto it = node_at_voxel.find(endpoint); it != node_at_voxel.end()) {
            parent_id = it->second;
        } else {
            VesselNode root;
            root.id = next_id++;
            root.pos = heat.voxel_center(endpoint);
            root.radius = estimate_radius(root.pos, path.size() > 1
                                                        ? (heat.voxel_center(path[path.size() - 2]) -
                                                           root.pos)
                                                              .eval()
                                                        : Vec3(1, 0, 0));
            root.parent = -1;
            tree.nodes.push_back(root);
            node_at_voxel.emplace(endpoint, root.id);
            parent_id = root.id;
        }

        // build the chain from the endpoint back out to the seed
        for (std::size_t i = path.size() - 1; i-- > 0;) {
            const Vec3 a = heat.voxel_center(path[i + 1]);
            const Vec3 b = heat.voxel_center(path[i]);
            const Vec3 tangent = b - a;
            std::vector<VesselNode> mids;
            emit_hop_nodes(a, b, tangent, mids);
            for (auto& m : mids) {
                m.id = next_id++;
                m.parent = parent_id;
                tree.nodes.push_back(m);
                parent_id = m.id;
            }
            VesselNode n;
            n.id = next_id++;
            n.pos = b;
            n.radius = estimate_radius(b, tangent);
            n.parent = parent_id;
            tree.nodes.push_back(n);
            node_at_voxel.emplace(path[i], n.id);
            parent_id = n.id;
        }

        // retire the branch neighborhood: tube support plus the dilated margin
        for (std::int64_t v : path) {
            const Vec3 c = heat.voxel_center(v);
            const double r = estimate_radius(c, Vec3(1, 0, 0)) +
                             (params.dilation_radius_vox + 1.0) * max_spacing;
            mark_visited_ball(c, r);
        }
        return true;
    }

    VesselTree run() {
        const std::int64_t source = pick_source();
        tf = fast_march(heat, comp, source);

        // seed candidates come from the binarized support only, so branch tips
        // never start inside the dark dilated margin; ordered by decreasing
        // arrival time (fixed after FMM)
        std::vector<std::int64_t> order;
        order.reserve(comp.size());
        for (std::int64_t v : comp)
            if (heat.at(v) >= params.binarize_threshold) order.push_back(v);
        std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
            const double ta = tf.times.at(a), tb = tf.times.at(b);
            if (ta != tb) return ta > tb;
            return a < b;
        });

        for (std::int64_t seed : order) {
            if (visited[static_cast<std::size_t>(seed)]) continue;
            if (static_cast<double>(visited_count) / static_cast<double>(comp.size()) >=
                params.coverage_stop)
                break;
            bool accepted = false;
            double len = 0.0;
            const bool completed = trace_branch(seed, accepted, len);
            if (!completed) continue;           // trapped: seed retired, keep going
            if (!accepted) break;               // branch shorter than min_branch_len
        }
        return tree;
    }
};

}  // namespace

VesselTree trace_component(const ScalarVolume& heatmap,
                           const std::vector<std::int64_t>& component,
                           const TracerParams& params) {
    params.validate();
    if (component.empty()) throw Error("trace_component: empty component");
    ComponentTracer tracer(heatmap, component, params);
    return tracer.run();
}

VesselTree trace_all(const ScalarVolume& heatmap, const TracerParams& params) {
    params.validate();
    const ScalarVolume mask = binarize_dilate(heatmap, params);
    const auto comps = connected_components(mask, params.min_component_voxels);
    VesselTree forest;
    long long offset = 0;
    for (const auto& comp : comps) {
        VesselTree t = trace_component(heatmap, comp, params);
        for (auto n : t.nodes) {
            n.id += offset;
            if (n.parent != -1) n.parent += offset;
            forest.nodes.push_back(n);
        }
        if (!t.nodes.empty()) {
            long long max_id = 0;
            for (const auto& n : t.nodes) max_id = std::max(max_id, n.id);
            offset += max_id;
        }
    }
    return forest;
}

}  // namespace vprune

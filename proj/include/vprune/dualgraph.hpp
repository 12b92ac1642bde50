#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vprune/types.hpp"

namespace vprune {

struct Segment {
    int id = 0;                          // dense index into SegmentSet
    std::vector<long long> node_ids;     // ordered along the branch, proximal first
    std::vector<Vec3> points;            // positions matching node_ids
    double length = 0.0;                 // mm, sum of consecutive point distances
};

struct SegmentSet {
    std::vector<Segment> segments;

    // segment ids incident to a tree node; shared cut/junction nodes list
    // several
    std::vector<int> segments_of_node(long long node_id) const;
};

// Cuts the forest into branch segments no longer than sampling_length_mm.
// Branch paths run between critical nodes (roots, bifurcations, tips) and are
// cut greedily from the proximal end. Cut and junction nodes are shared
// between adjacent segments as endpoints. The forest should already be
// resampled to at most ~1 mm node spacing.
SegmentSet segment_branches(const VesselTree& forest, double sampling_length_mm);

struct DualGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;        // unordered, i < j
    std::vector<std::vector<double>> features;     // per node, length L
    std::vector<double> targets;                   // empty or size n, in [0,1]
    std::vector<double> scores;                    // empty or size n, in (0,1)
    std::vector<std::vector<long long>> node_ids;  // source-tree node ids per segment
    std::vector<double> lengths;                   // mm per segment
};

// Dual graph of a segment set: one node per segment, an edge wherever two
// segments share a tree endpoint node.
DualGraph build_dual(const SegmentSet& segments);

// Four deterministic filter layers standing in for CNN features: raw heatmap,
// Gaussian sigma=1 and sigma=2 (voxel units), and the gradient magnitude of
// the sigma=1 layer rescaled to [0,1].
FeatureStack build_feature_volumes(const ScalarVolume& heatmap);

// S_l(b) = mean of the 3x3x3 neighborhood (clamped at borders) of the voxel
// containing b; the segment feature is the mean of S_l over its nodes,
// concatenated over layers.
std::vector<std::vector<double>> aggregate_features(const SegmentSet& segments,
                                                    const FeatureStack& stack);

// Soft targets G(i): fraction of segment nodes within nmd of the ground-truth
// centerline polyline. Empty ground truth gives all zeros.
std::vector<double> label_targets(const SegmentSet& segments, const VesselTree& gt_resampled,
                                  double nmd_mm);

std::string dualgraph_to_json(const DualGraph& g);
DualGraph dualgraph_from_json(const std::string& text);

}  // namespace vprune

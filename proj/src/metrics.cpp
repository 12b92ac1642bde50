#include "vprune/metrics.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "vprune/geometry.hpp"
#include "vprune/resample.hpp"

namespace vprune {

VesselTree prune(const VesselTree& forest, const SegmentSet& segments,
                 const std::vector<double>& scores, double threshold) {
    if (scores.size() != segments.segments.size())
        throw Error("prune: scores misaligned with segments");

    // a node survives iff some incident segment scores >= threshold
    std::unordered_set<long long> keep;
    for (const auto& seg : segments.segments) {
        if (scores[static_cast<std::size_t>(seg.id)] < threshold) continue;
        for (long long id : seg.node_ids) keep.insert(id);
    }

    VesselTree out;
    out.nodes.reserve(keep.size());
    for (const auto& n : forest.nodes) {
        if (!keep.count(n.id)) continue;
        VesselNode kept = n;
        if (kept.parent != -1 && !keep.count(kept.parent)) kept.parent = -1;
        out.nodes.push_back(kept);
    }
    return out;
}

namespace {

std::vector<Vec3> node_positions(const VesselTree& t) {
    std::vector<Vec3> out;
    out.reserve(t.nodes.size());
    for (const auto& n : t.nodes) out.push_back(n.pos);
    return out;
}

}  // namespace

CatchMetrics catch_metrics(const VesselTree& pred, const VesselTree& gt, double catch_dist_mm) {
    CatchMetrics m;
    m.total_pred = static_cast<long long>(pred.nodes.size());
    m.total_gt = static_cast<long long>(gt.nodes.size());
    if (pred.empty() && gt.empty()) {
        m.precision = m.recall = m.f1 = 1.0;
        return m;
    }
    if (pred.empty()) {
        m.precision = 1.0;  // nothing predicted, nothing wrong
        m.recall = 0.0;
        m.f1 = 0.0;
        return m;
    }
    if (gt.empty()) {
        m.precision = 0.0;
        m.recall = 1.0;
        m.f1 = 0.0;
        return m;
    }
    const PolylineIndex gt_index(gt);
    const PolylineIndex pred_index(pred);
    for (const auto& p : node_positions(pred))
        if (gt_index.nearest_distance(p) <= catch_dist_mm) ++m.caught_pred;
    for (const auto& p : node_positions(gt))
        if (pred_index.nearest_distance(p) <= catch_dist_mm) ++m.caught_gt;
    m.precision = static_cast<double>(m.caught_pred) / static_cast<double>(m.total_pred);
    m.recall = static_cast<double>(m.caught_gt) / static_cast<double>(m.total_gt);
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

SpatialMetrics spatial_metrics(const VesselTree& pred, const VesselTree& gt, double sig_dist_mm) {
    SpatialMetrics m;
    if (pred.empty() || gt.empty()) return m;  // flagged invalid
    const PolylineIndex gt_index(gt);
    const PolylineIndex pred_index(pred);
    // per-direction accumulators combined commutatively, so
    // spatial_metrics(a,b) == spatial_metrics(b,a) exactly
    struct Directed {
        double sum = 0.0, sig_sum = 0.0;
        long long count = 0, sig_count = 0;
    };
    auto directed = [&](const VesselTree& from, const PolylineIndex& to) {
        Directed d;
        for (const auto& p : node_positions(from)) {
            const double dist = to.nearest_distance(p);
            d.sum += dist;
            ++d.count;
            if (dist > sig_dist_mm) {
                d.sig_sum += dist;
                ++d.sig_count;
            }
        }
        return d;
    };
    const Directed fwd = directed(pred, gt_index);
    const Directed rev = directed(gt, pred_index);
    const long long count = fwd.count + rev.count;
    const long long sig_count = fwd.sig_count + rev.sig_count;
    m.sd = (fwd.sum + rev.sum) / static_cast<double>(count);
    m.ssd = sig_count > 0 ? (fwd.sig_sum + rev.sig_sum) / static_cast<double>(sig_count) : 0.0;
    m.pssd = static_cast<double>(sig_count) / static_cast<double>(count);
    m.valid = true;
    return m;
}

MetricReport evaluate_pipeline(const VesselTree& pred, const VesselTree& gt,
                               const EvalParams& params) {
    params.validate();
    const VesselTree pred_r = resample_polyline(pred, params.resample_step_mm);
    const VesselTree gt_r = resample_polyline(gt, params.resample_step_mm);

    MetricReport r;
    r.catch_dist_mm = params.catch_dist_mm;
    r.sig_dist_mm = params.sig_dist_mm;
    r.pred_empty = pred_r.empty();
    r.gt_empty = gt_r.empty();

    const CatchMetrics cm = catch_metrics(pred_r, gt_r, params.catch_dist_mm);
    r.precision = cm.precision;
    r.recall = cm.recall;
    r.f1 = cm.f1;
    r.caught_pred = cm.caught_pred;
    r.total_pred = cm.total_pred;
    r.caught_gt = cm.caught_gt;
    r.total_gt = cm.total_gt;

    const SpatialMetrics sm = spatial_metrics(pred_r, gt_r, params.sig_dist_mm);
    r.sd_mm = sm.sd;
    r.ssd_mm = sm.ssd;
    r.pssd = sm.pssd;
    r.spatial_valid = sm.valid;
    return r;
}

std::string report_to_json(const MetricReport& r) {
    nlohmann::json j;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["sd_mm"] = r.sd_mm;
    j["ssd_mm"] = r.ssd_mm;
    j["pssd"] = r.pssd;
    j["counts"] = {{"caught_pred", r.caught_pred},
                   {"total_pred", r.total_pred},
                   {"caught_gt", r.caught_gt},
                   {"total_gt", r.total_gt}};
    j["flags"] = {{"spatial_valid", r.spatial_valid},
                  {"pred_empty", r.pred_empty},
                  {"gt_empty", r.gt_empty}};
    j["config"] = {{"catch_dist_mm", r.catch_dist_mm}, {"sig_dist_mm", r.sig_dist_mm}};
    return j.dump(2) + "\n";
}

MetricReport report_from_json(const std::string& text) {
    MetricReport r;
    try {
        const auto j = nlohmann::json::parse(text);
        r.precision = j.at("precision").get<double>();
        r.recall = j.at("recall").get<double>();
        r.f1 = j.at("f1").get<double>();
        r.sd_mm = j.at("sd_mm").get<double>();
        r.ssd_mm = j.at("ssd_mm").get<double>();
        r.pssd = j.at("pssd").get<double>();
        r.caught_pred = j.at("counts").at("caught_pred").get<long long>();
        r.total_pred = j.at("counts").at("total_pred").get<long long>();
        r.caught_gt = j.at("counts").at("caught_gt").get<long long>();
        r.total_gt = j.at("counts").at("total_gt").get<long long>();
        r.spatial_valid = j.at("flags").at("spatial_valid").get<bool>();
        r.pred_empty = j.at("flags").at("pred_empty").get<bool>();
        r.gt_empty = j.at("flags").at("gt_empty").get<bool>();
        r.catch_dist_mm = j.at("config").at("catch_dist_mm").get<double>();
        r.sig_dist_mm = j.at("config").at("sig_dist_mm").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report json: ") + e.what());
    }
    return r;
}

}  // namespace vprune

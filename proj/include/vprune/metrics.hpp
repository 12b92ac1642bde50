#pragma once

#include <string>
#include <vector>

#include "vprune/dualgraph.hpp"
#include "vprune/types.hpp"

namespace vprune {

struct EvalParams {
    double catch_dist_mm = 4.0;
    double sig_dist_mm = 2.0;
    double resample_step_mm = 1.0;

    void validate() const {
        if (!(catch_dist_mm > 0.0)) throw ConfigError("eval.catch_dist_mm: must be positive");
        if (!(sig_dist_mm > 0.0)) throw ConfigError("eval.sig_dist_mm: must be positive");
        if (!(resample_step_mm > 0.0)) throw ConfigError("eval.resample_step_mm: must be positive");
    }
};

// Drops every node that only belongs to segments scoring below the threshold.
// Shared endpoints survive with any surviving incident segment; orphaned
// survivors are re-rooted. Node positions never change.
VesselTree prune(const VesselTree& forest, const SegmentSet& segments,
                 const std::vector<double>& scores, double threshold);

struct CatchMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long long caught_pred = 0, total_pred = 0;
    long long caught_gt = 0, total_gt = 0;
};

// Node-catching metrics at catch_dist: precision over predicted nodes against
// the ground-truth polyline, recall the other way around. Both trees should
// already be resampled to <= 1 mm spacing. Conventions: empty pred gives
// P=1/R=0, empty gt gives P=0/R=1, both empty gives all ones.
CatchMetrics catch_metrics(const VesselTree& pred, const VesselTree& gt, double catch_dist_mm);

struct SpatialMetrics {
    double sd = 0.0;    // mean node-to-polyline distance over both directions
    double ssd = 0.0;   // mean of distances exceeding sig_dist (0 when none)
    double pssd = 0.0;  // fraction of distances exceeding sig_dist
    bool valid = false; // false when either tree is empty
};

SpatialMetrics spatial_metrics(const VesselTree& pred, const VesselTree& gt, double sig_dist_mm);

struct MetricReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double sd_mm = 0.0;
    double ssd_mm = 0.0;
    double pssd = 0.0;
    long long caught_pred = 0, total_pred = 0;
    long long caught_gt = 0, total_gt = 0;
    bool spatial_valid = false;
    bool pred_empty = false;
    bool gt_empty = false;
    double catch_dist_mm = 4.0;
    double sig_dist_mm = 2.0;
};

// Shared-resampling composition of both metric families.
MetricReport evaluate_pipeline(const VesselTree& pred, const VesselTree& gt,
                               const EvalParams& params);

std::string report_to_json(const MetricReport& r);
MetricReport report_from_json(const std::string& text);

}  // namespace vprune

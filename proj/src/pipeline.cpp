#include "vprune/pipeline.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <thread>

#include <json.hpp>

#include "vprune/dualgraph.hpp"
#include "vprune/gat.hpp"
#include "vprune/resample.hpp"
#include "vprune/rng.hpp"
#include "vprune/swc.hpp"
#include "vprune/tracer.hpp"
#include "vprune/util.hpp"
#include "vprune/volume_io.hpp"

namespace vprune {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kToolVersion = "vesselprune 0.1.0";

std::string scene_id(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03d", prefix, i);
    return buf;
}

fs::path manifest_path(const fs::path& dir, Stage s) {
    return dir / (std::string("manifest_") + stage_name(s) + ".json");
}

// manifest with config hash, stage seed, and input/output hashes; inputs are
// recorded relative to the manifest's directory
void write_manifest(const fs::path& dir, Stage s, const PipelineConfig& cfg,
                    std::uint64_t seed, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs, const json& notes = json::object()) {
    json j;
    j["stage"] = stage_name(s);
    j["tool"] = kToolVersion;
    j["config_hash"] = cfg.config_hash();
    j["seed"] = seed;
    json in = json::object(), out = json::object();
    for (const auto& p : inputs) in[fs::relative(p, dir).generic_string()] = file_hash_hex(p);
    for (const auto& p : outputs) out[fs::relative(p, dir).generic_string()] = file_hash_hex(p);
    j["inputs"] = in;
    j["outputs"] = out;
    j["notes"] = notes;
    write_file(manifest_path(dir, s), j.dump(2) + "\n");
}

void require_input(const fs::path& p, Stage consumer) {
    if (!fs::exists(p))
        throw MissingInputError(std::string(stage_name(consumer)) + ": missing input " +
                                p.string() + " (run the upstream stage first)");
}

// strict mode: the producing stage's manifest must exist and its recorded
// output hash must match the file on disk
void verify_against_manifest(const fs::path& dir, Stage producer, const fs::path& file,
                             bool strict) {
    if (!strict) return;
    const fs::path mp = manifest_path(dir, producer);
    if (!fs::exists(mp))
        throw MissingInputError("strict: missing manifest " + mp.string());
    json j;
    try {
        j = json::parse(read_file(mp));
    } catch (const json::exception& e) {
        throw MissingInputError("strict: unreadable manifest " + mp.string() + ": " + e.what());
    }
    const std::string rel = fs::relative(file, dir).generic_string();
    if (!j.at("outputs").contains(rel))
        throw MissingInputError("strict: " + rel + " not recorded in " + mp.string());
    const std::string expected = j.at("outputs").at(rel).get<std::string>();
    if (expected != file_hash_hex(file))
        throw MissingInputError("strict: hash mismatch for " + file.string());
}

std::uint64_t stage_seed(const PipelineConfig& cfg, Stage s, std::uint64_t scene_stream) {
    return split_seed(cfg.seed, static_cast<std::uint64_t>(s), scene_stream);
}

struct ScenePaths {
    fs::path dir;
    fs::path gt, heat, corrupt, traced, traced_resampled, dual, pruned, scores, report_baseline,
        report_pruned;
};

ScenePaths scene_paths(const fs::path& out, const SceneRef& scene) {
    ScenePaths p;
    p.dir = scene_dir(out, scene);
    p.gt = p.dir / "gt.swc";
    p.heat = p.dir / "heatmap.cvol";
    p.corrupt = p.dir / "corrupt.cvol";
    p.traced = p.dir / "traced.swc";
    p.traced_resampled = p.dir / "traced_resampled.swc";
    p.dual = p.dir / "dualgraph.json";
    p.pruned = p.dir / "pruned.swc";
    p.scores = p.dir / "scores.json";
    p.report_baseline = p.dir / "report_baseline.json";
    p.report_pruned = p.dir / "report_pruned.json";
    return p;
}

SegmentSet segments_from_dual(const DualGraph& g, const VesselTree& forest) {
    std::map<long long, Vec3> pos;
    for (const auto& n : forest.nodes) pos[n.id] = n.pos;
    SegmentSet set;
    for (int i = 0; i < g.n; ++i) {
        Segment s;
        s.id = i;
        s.node_ids = g.node_ids.at(static_cast<std::size_t>(i));
        for (long long id : s.node_ids) {
            const auto it = pos.find(id);
            if (it == pos.end())
                throw MissingInputError("dualgraph references node " + std::to_string(id) +
                                        " absent from the traced forest");
            s.points.push_back(it->second);
        }
        for (std::size_t k = 0; k + 1 < s.points.size(); ++k)
            s.length += (s.points[k + 1] - s.points[k]).norm();
        set.segments.push_back(std::move(s));
    }
    return set;
}

json report_json_obj(const MetricReport& r) { return json::parse(report_to_json(r)); }

MetricReport mean_report(const std::vector<MetricReport>& reports) {
    MetricReport m;
    if (reports.empty()) return m;
    for (const auto& r : reports) {
        m.precision += r.precision;
        m.recall += r.recall;
        m.f1 += r.f1;
        m.sd_mm += r.sd_mm;
        m.ssd_mm += r.ssd_mm;
        m.pssd += r.pssd;
        m.caught_pred += r.caught_pred;
        m.total_pred += r.total_pred;
        m.caught_gt += r.caught_gt;
        m.total_gt += r.total_gt;
    }
    const double n = static_cast<double>(reports.size());
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
    m.sd_mm /= n;
    m.ssd_mm /= n;
    m.pssd /= n;
    m.spatial_valid = std::all_of(reports.begin(), reports.end(),
                                  [](const MetricReport& r) { return r.spatial_valid; });
    m.catch_dist_mm = reports.front().catch_dist_mm;
    m.sig_dist_mm = reports.front().sig_dist_mm;
    return m;
}

}  // namespace

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Synth: return "synth";
        case Stage::Heatmap: return "heatmap";
        case Stage::Trace: return "trace";
        case Stage::Featurize: return "featurize";
        case Stage::Train: return "train";
        case Stage::Prune: return "prune";
        case Stage::Eval: return "eval";
    }
    return "unknown";
}

std::vector<SceneRef> scene_list(const PipelineConfig& cfg) {
    std::vector<SceneRef> scenes;
    for (int i = 0; i < cfg.bench.train_scenes; ++i)
        scenes.push_back({scene_id("train", i), static_cast<std::uint64_t>(i), false});
    for (int i = 0; i < cfg.bench.test_scenes; ++i)
        scenes.push_back({scene_id("test", i), 1000000ULL + static_cast<std::uint64_t>(i), true});
    return scenes;
}

std::filesystem::path scene_dir(const std::filesystem::path& out, const SceneRef& scene) {
    return out / "scenes" / scene.name;
}

void run_synth(const PipelineConfig& cfg, const fs::path& out, bool /*strict*/) {
    for (const auto& scene : scene_list(cfg)) {
        const ScenePaths p = scene_paths(out, scene);
        SynthParams sp = cfg.synth;
        sp.rng_seed = stage_seed(cfg, Stage::Synth, scene.scene_stream);
        const VesselTree gt = generate_forest(sp);
        swc_write(p.gt, gt);
        write_manifest(p.dir, Stage::Synth, cfg, sp.rng_seed, {}, {p.gt},
                       {{"nodes", gt.nodes.size()}});
    }
}

void run_heatmap(const PipelineConfig& cfg, const fs::path& out, bool strict) {
    for (const auto& scene : scene_list(cfg)) {
        const ScenePaths p = scene_paths(out, scene);
        require_input(p.gt, Stage::Heatmap);
        verify_against_manifest(p.dir, Stage::Synth, p.gt, strict);
        const VesselTree gt = swc_read(p.gt);
        const ScalarVolume heat =
            compute_heatmap(gt, cfg.synth.dims, cfg.synth.spacing, cfg.heatmap);
        const std::uint64_t seed = stage_seed(cfg, Stage::Heatmap, scene.scene_stream);
        int tubes_placed = 0;
        const ScalarVolume corrupted =
            corrupt_heatmap(heat, gt, cfg.heatmap, cfg.corrupt, seed, &tubes_placed);
        cvol_write(p.heat, heat);
        cvol_write(p.corrupt, corrupted);
        write_manifest(p.dir, Stage::Heatmap, cfg, seed, {p.gt}, {p.heat, p.corrupt},
                       {{"spurious_tubes_placed", tubes_placed}});
    }
}

void run_trace(const PipelineConfig& cfg, const fs::path& out, bool strict) {
    for (const auto& scene : scene_list(cfg)) {
        const ScenePaths p = scene_paths(out, scene);
        require_input(p.corrupt, Stage::Trace);
        verify_against_manifest(p.dir, Stage::Heatmap, p.corrupt, strict);
        const ScalarVolume heat = cvol_read(p.corrupt);
        const VesselTree traced = trace_all(heat, cfg.tracer);
        swc_write(p.traced, traced);
        write_manifest(p.dir, Stage::Trace, cfg, stage_seed(cfg, Stage::Trace, scene.scene_stream),
                       {p.corrupt}, {p.traced},
                       {{"empty_output", traced.empty()}, {"nodes", traced.nodes.size()}});
    }
}

void run_featurize(const PipelineConfig& cfg, const fs::path& out, bool strict) {
    for (const auto& scene : scene_list(cfg)) {
        const ScenePaths p = scene_paths(out, scene);
        require_input(p.traced, Stage::Featurize);
        require_input(p.corrupt, Stage::Featurize);
        require_input(p.gt, Stage::Featurize);
        verify_against_manifest(p.dir, Stage::Trace, p.traced, strict);
        verify_against_manifest(p.dir, Stage::Heatmap, p.corrupt, strict);
        verify_against_manifest(p.dir, Stage::Synth, p.gt, strict);

        const VesselTree traced = swc_read(p.traced);
        const VesselTree resampled = resample_polyline(traced, cfg.dual.resample_step_mm);
        const SegmentSet segs = segment_branches(resampled, cfg.dual.sampling_length_mm);
        DualGraph dual = build_dual(segs);
        FeatureStack stack;
        if (cfg.dual.feature_volumes.empty()) {
            stack = build_feature_volumes(cvol_read(p.corrupt));
        } else {
            // externally supplied feature layers replace the filter proxy
            for (const auto& fv : cfg.dual.feature_volumes) {
                stack.layers.push_back(cvol_read(fv));
                stack.channel_names.push_back(fs::path(fv).stem().string());
            }
            stack.validate();
            if (!(stack.layers.front().dims == cfg.synth.dims))
                throw MissingInputError("feature volume dims do not match the scene volume");
        }
        dual.features = aggregate_features(segs, stack);
        const VesselTree gt = swc_read(p.gt);
        const VesselTree gt_r = resample_polyline(gt, cfg.dual.resample_step_mm);
        dual.targets = label_targets(segs, gt_r, cfg.dual.nmd_mm);

        swc_write(p.traced_resampled, resampled);
        write_file(p.dual, dualgraph_to_json(dual));
        write_manifest(p.dir, Stage::Featurize, cfg,
                       stage_seed(cfg, Stage::Featurize, scene.scene_stream),
                       {p.traced, p.corrupt, p.gt}, {p.traced_resampled, p.dual},
                       {{"segments", dual.n}});
    }
}

void run_train(const PipelineConfig& cfg, const fs::path& out, bool strict) {
    std::vector<TrainSample> dataset;
    std::vector<fs::path> inputs;
    int skipped_empty = 0;
    for (const auto& scene : scene_list(cfg)) {
        if (scene.is_test) continue;
        const ScenePaths p = scene_paths(out, scene);
        require_input(p.dual, Stage::Train);
        verify_against_manifest(p.dir, Stage::Featurize, p.dual, strict);
        const DualGraph dual = dualgraph_from_json(read_file(p.dual));
        if (dual.n == 0) {
            ++skipped_empty;
            continue;
        }
        if (dual.targets.empty())
            throw MissingInputError("train: " + p.dual.string() + " has no targets");
        TrainSample sample;
        sample.graph = GatGraph::from_dual(dual);
        sample.targets = Eigen::Map<const Eigen::VectorXd>(dual.targets.data(),
                                                           static_cast<Eigen::Index>(dual.n));
        dataset.push_back(std::move(sample));
        inputs.push_back(p.dual);
    }
    if (dataset.empty()) throw MissingInputError("train: no non-empty training graphs");

    const std::uint64_t seed = stage_seed(cfg, Stage::Train, 0);
    GatModel model = GatModel::create(static_cast<int>(dataset.front().graph.features.cols()),
                                      cfg.gat, seed);
    const TrainResult result = train(model, dataset, cfg.gat.epochs, seed);

    const fs::path model_dir = out / "model";
    const fs::path ckpt = model_dir / "model.ckpt";
    checkpoint_save(ckpt, model);

    json hist;
    hist["final_loss"] = result.loss_history.empty() ? 0.0 : result.loss_history.back();
    hist["epochs"] = result.loss_history.size();
    hist["loss_history"] = result.loss_history;
    const fs::path log = model_dir / "training_log.json";
    write_file(log, hist.dump(2) + "\n");
    write_manifest(model_dir, Stage::Train, cfg, seed, inputs, {ckpt, log},
                   {{"graphs", dataset.size()}, {"skipped_empty", skipped_empty}});
}

void run_prune(const PipelineConfig& cfg, const fs::path& out, bool strict) {
    const fs::path ckpt = out / "model" / "model.ckpt";
    require_input(ckpt, Stage::Prune);
    verify_against_manifest(out / "model", Stage::Train, ckpt, strict);
    const GatModel model = checkpoint_load(ckpt);

    for (const auto& scene : scene_list(cfg)) {
        if (!scene.is_test) continue;
        const ScenePaths p = scene_paths(out, scene);
        require_input(p.dual, Stage::Prune);
        require_input(p.traced_resampled, Stage::Prune);
        verify_against_manifest(p.dir, Stage::Featurize, p.dual, strict);
        verify_against_manifest(p.dir, Stage::Featurize, p.traced_resampled, strict);

        const DualGraph dual = dualgraph_from_json(read_file(p.dual));
        const VesselTree resampled = swc_read(p.traced_resampled);
        const std::vector<double> scores = predict(model, dual);
        const SegmentSet segs = segments_from_dual(dual, resampled);
        const VesselTree pruned = prune(resampled, segs, scores, cfg.gat.threshold);
        swc_write(p.pruned, pruned);

        json sj;
        sj["threshold"] = cfg.gat.threshold;
        sj["scores"] = scores;
        write_file(p.scores, sj.dump(2) + "\n");
        write_manifest(p.dir, Stage::Prune, cfg, stage_seed(cfg, Stage::Prune, scene.scene_stream),
                       {p.dual, p.traced_resampled, ckpt}, {p.pruned, p.scores},
                       {{"kept_nodes", pruned.nodes.size()},
                        {"initial_nodes", resampled.nodes.size()}});
    }
}

void run_eval(const PipelineConfig& cfg, const fs::path& out, bool strict) {
    std::vector<MetricReport> baselines, pruneds;
    json scenes_json = json::array();
    std::vector<fs::path> inputs;
    const fs::path report_dir = out / "reports";

    for (const auto& scene : scene_list(cfg)) {
        if (!scene.is_test) continue;
        const ScenePaths p = scene_paths(out, scene);
        require_input(p.gt, Stage::Eval);
        require_input(p.traced, Stage::Eval);
        require_input(p.pruned, Stage::Eval);
        verify_against_manifest(p.dir, Stage::Synth, p.gt, strict);
        verify_against_manifest(p.dir, Stage::Trace, p.traced, strict);
        verify_against_manifest(p.dir, Stage::Prune, p.pruned, strict);

        const VesselTree gt = swc_read(p.gt);
        const VesselTree traced = swc_read(p.traced);
        const VesselTree pruned = swc_read(p.pruned);
        const MetricReport baseline = evaluate_pipeline(traced, gt, cfg.eval);
        const MetricReport after = evaluate_pipeline(pruned, gt, cfg.eval);
        write_file(p.report_baseline, report_to_json(baseline));
        write_file(p.report_pruned, report_to_json(after));
        write_manifest(p.dir, Stage::Eval, cfg, stage_seed(cfg, Stage::Eval, scene.scene_stream),
                       {p.gt, p.traced, p.pruned}, {p.report_baseline, p.report_pruned});
        baselines.push_back(baseline);
        pruneds.push_back(after);
        json row;
        row["name"] = scene.name;
        row["baseline"] = report_json_obj(baseline);
        row["pruned"] = report_json_obj(after);
        scenes_json.push_back(std::move(row));
        inputs.push_back(p.report_baseline);
        inputs.push_back(p.report_pruned);
    }

    const MetricReport bm = mean_report(baselines);
    const MetricReport pm = mean_report(pruneds);
    json summary;
    summary["scenes"] = scenes_json;
    summary["baseline_mean"] = report_json_obj(bm);
    summary["pruned_mean"] = report_json_obj(pm);
    summary["delta"] = {{"precision", pm.precision - bm.precision},
                        {"recall", pm.recall - bm.recall},
                        {"f1", pm.f1 - bm.f1}};
    const fs::path summary_json = report_dir / "summary.json";
    write_file(summary_json, summary.dump(2) + "\n");

    std::string txt;
    txt += "variant    precision  recall     f1         sd_mm      ssd_mm     pssd\n";
    auto row = [&txt](const char* name, const MetricReport& r) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-10s %-10s %-10s %-10s %-10s %-10s %-10s\n", name,
                      g9(r.precision).c_str(), g9(r.recall).c_str(), g9(r.f1).c_str(),
                      g9(r.sd_mm).c_str(), g9(r.ssd_mm).c_str(), g9(r.pssd).c_str());
        txt += buf;
    };
    row("baseline", bm);
    row("pruned", pm);
    const fs::path summary_txt = report_dir / "summary.txt";
    write_file(summary_txt, txt);
    write_manifest(report_dir, Stage::Eval, cfg, stage_seed(cfg, Stage::Eval, 0), inputs,
                   {summary_json, summary_txt});
}

void run_pipeline(const PipelineConfig& cfg, const fs::path& out, bool strict) {
    run_synth(cfg, out, strict);
    run_heatmap(cfg, out, strict);
    run_trace(cfg, out, strict);
    run_featurize(cfg, out, strict);
    run_train(cfg, out, strict);
    run_prune(cfg, out, strict);
    run_eval(cfg, out, strict);
}

RunSummary read_summary(const fs::path& out) {
    const fs::path p = out / "reports" / "summary.json";
    json j;
    try {
        j = json::parse(read_file(p));
    } catch (const json::exception& e) {
        throw MissingInputError("unreadable summary " + p.string() + ": " + e.what());
    }
    RunSummary s;
    s.baseline_mean = report_from_json(j.at("baseline_mean").dump());
    s.pruned_mean = report_from_json(j.at("pruned_mean").dump());
    return s;
}

std::vector<SweepRow> run_sweep(const PipelineConfig& cfg, const std::string& axis,
                                const std::vector<double>& values, const fs::path& out,
                                bool strict) {
    if (values.empty()) throw ConfigError("sweep: no values given");
    auto apply = [&axis](PipelineConfig c, double v) {
        if (axis == "nmd") {
            c.dual.nmd_mm = v;
        } else if (axis == "sampling_length") {
            c.dual.sampling_length_mm = v;
        } else if (axis == "threshold") {
            c.gat.threshold = v;
        } else {
            throw ConfigError("sweep: unknown axis '" + axis +
                              "' (expected nmd|sampling_length|threshold)");
        }
        c.validate();
        return c;
    };

    std::vector<fs::path> dirs;
    std::vector<PipelineConfig> cfgs;
    for (double v : values) {
        cfgs.push_back(apply(cfg, v));
        dirs.push_back(out / "sweep" / (axis + "_" + g9(v)));
    }

    // sweep points are independent; run a few in parallel
    const std::size_t workers =
        std::min<std::size_t>(values.size(), std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::future<void>> futures;
    std::size_t next = 0;
    while (next < values.size() || !futures.empty()) {
        while (next < values.size() && futures.size() < workers) {
            const std::size_t i = next++;
            futures.push_back(std::async(std::launch::async, [&, i] {
                run_pipeline(cfgs[i], dirs[i], strict);
            }));
        }
        futures.front().get();
        futures.erase(futures.begin());
    }

    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const RunSummary s = read_summary(dirs[i]);
        rows.push_back({values[i], s.pruned_mean, s.baseline_mean});
    }

    json jt = json::array();
    std::string txt;
    txt += axis + "      precision  recall     f1         sd_mm      ssd_mm     pssd\n";
    for (const auto& r : rows) {
        json row;
        row["value"] = r.value;
        row["pruned"] = report_json_obj(r.pruned_mean);
        row["baseline"] = report_json_obj(r.baseline_mean);
        jt.push_back(std::move(row));
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-10s %-10s %-10s %-10s %-10s %-10s %-10s\n",
                      g9(r.value).c_str(), g9(r.pruned_mean.precision).c_str(),
                      g9(r.pruned_mean.recall).c_str(), g9(r.pruned_mean.f1).c_str(),
                      g9(r.pruned_mean.sd_mm).c_str(), g9(r.pruned_mean.ssd_mm).c_str(),
                      g9(r.pruned_mean.pssd).c_str());
        txt += buf;
    }
    write_file(out / "sweep" / "sweep_table.json", jt.dump(2) + "\n");
    write_file(out / "sweep" / "sweep_table.txt", txt);
    return rows;
}

}  // namespace vprune

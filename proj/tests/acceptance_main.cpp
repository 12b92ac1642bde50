// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "vprune/dualgraph.hpp"
#include "vprune/gat.hpp"
#include "vprune/geometry.hpp"
#include "vprune/heatmap.hpp"
#include "vprune/metrics.hpp"
#include "vprune/pipeline.hpp"
#include "vprune/resample.hpp"
#include "vprune/rng.hpp"
#include "vprune/swc.hpp"
#include "vprune/synth.hpp"
#include "vprune/util.hpp"

using namespace vprune;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int id;
    std::string label;
    bool passed = true;
    std::vector<std::string> notes;
    double seconds = 0.0;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            passed = false;
            notes.push_back(what);
        }
    }
};

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

VesselTree axis_tree(double y, double z, double x0, double x1) {
    VesselTree t;
    t.nodes.push_back({1, 2, Vec3(x0, y, z), 1.0, -1});
    t.nodes.push_back({2, 2, Vec3(x1, y, z), 1.0, 1});
    return t;
}

VesselTree chain_tree(double length_mm) {
    VesselTree t;
    long long id = 1;
    for (double x = 0.0; x <= length_mm + 1e-9; x += 1.0) {
        t.nodes.push_back({id, 2, Vec3(x, 0, 0), 1.0, id == 1 ? -1 : id - 1});
        ++id;
    }
    return t;
}

VesselTree straight_line_nodes(double y, int count) {
    VesselTree t;
    for (int k = 0; k < count; ++k)
        t.nodes.push_back({k + 1, 2, Vec3(k * 1.0, y, 0), 1.0, k == 0 ? -1 : k});
    return t;
}

SynthParams scene_params(std::uint64_t seed) {
    SynthParams p;
    p.rng_seed = seed;
    p.n_trees = 2;
    p.depth = 2;
    p.branch_len_min_mm = 5.0;
    p.branch_len_max_mm = 11.0;
    p.dims = GridDims{64, 64, 64};
    return p;
}

GatGraph random_gat_graph(Rng& rng, int n, int dim) {
    DualGraph d;
    d.n = n;
    for (int i = 0; i < n; ++i) {
        std::vector<double> f;
        for (int c = 0; c < dim; ++c) f.push_back(rng.uniform());
        d.features.push_back(std::move(f));
        d.node_ids.push_back({i + 1});
        d.lengths.push_back(1.0);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform() < 0.45) d.edges.emplace_back(i, j);
    return GatGraph::from_dual(d);
}

// ---- criterion 1: heatmap closed form ----------------------------------

void criterion_heatmap(Criterion& c) {
    const HeatmapParams hp;  // alpha = 6, d_max = 5
    const GridDims dims{48, 16, 12};
    const ScalarVolume on =
        compute_heatmap(axis_tree(4.5, 4.5, 8.5, 39.5), dims, Vec3(1, 1, 1), hp);
    c.require(std::abs(on.at(20, 4, 4) - 1.0) <= 1e-12, "D=0 must give exactly 1");
    c.require(std::abs(on.at(20, 9, 4) - std::exp(-6.0)) <= 1e-12, "D=d_max must give e^-6");
    const ScalarVolume off =
        compute_heatmap(axis_tree(5.0, 4.5, 8.5, 39.5), dims, Vec3(1, 1, 1), hp);
    c.require(std::abs(off.at(20, 7, 4) - std::exp(-3.0)) <= 1e-12, "D=d_max/2 must give e^-3");
    c.require(off.at(20, 10, 4) == 0.0, "D>d_max must give 0");

    // brute-force oracle on a 32-cube
    SynthParams p = scene_params(31);
    p.dims = GridDims{32, 32, 32};
    p.n_trees = 1;
    const VesselTree tree = generate_forest(p);
    const ScalarVolume fast = compute_heatmap(tree, p.dims, p.spacing, hp);
    const auto edges = tree.edges();
    double worst = 0.0;
    for (std::int64_t i = 0; i < p.dims.count(); ++i) {
        double d = std::numeric_limits<double>::infinity();
        const Vec3 pos = fast.voxel_center(i);
        for (const auto& [a, b] : edges) d = std::min(d, point_segment_distance(pos, a, b));
        const double expected = d <= hp.d_max_mm ? std::exp(-hp.alpha * d / hp.d_max_mm) : 0.0;
        worst = std::max(worst, std::abs(fast.at(i) - expected));
    }
    c.require(worst <= 1e-9, "brute-force oracle disagreement " + g9(worst));
}

// ---- criterion 2: GAT correctness --------------------------------------

void criterion_gat(Criterion& c) {
    GatHyper hyper;
    hyper.heads = 2;
    hyper.hidden_dim = 3;

    // attention rows sum to 1
    Rng arng(1001);
    for (int trial = 0; trial < 8; ++trial) {
        GatGraph g = random_gat_graph(arng, 4 + static_cast<int>(arng.below(5)), 4);
        const GatModel model = GatModel::create(4, hyper, 50 + trial);
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            Eigen::MatrixXd h = g.features;
            for (std::size_t q = 0; q < l; ++q) h = layer_forward(model.layers[q], g, h);
            GatLayer probe = model.layers[l];
            GatGraph probe_graph = g;
            probe_graph.features = h;
            for (int k = 0; k < probe.heads; ++k) {
                const auto alpha = attention_coefficients(probe, probe_graph, k);
                for (const auto& row : alpha) {
                    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
                    c.require(std::abs(sum - 1.0) <= 1e-9, "attention row sum " + g9(sum));
                    for (double v : row)
                        c.require(v > 0.0 && v <= 1.0, "alpha out of (0,1]");
                }
            }
        }
    }

    // exact permutation equivariance
    Rng prng(2002);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 5 + static_cast<int>(prng.below(4));
        DualGraph d;
        d.n = n;
        for (int i = 0; i < n; ++i) {
            std::vector<double> f;
            for (int k = 0; k < 4; ++k) f.push_back(prng.uniform());
            d.features.push_back(std::move(f));
            d.node_ids.push_back({i + 1});
            d.lengths.push_back(1.0);
        }
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (prng.uniform() < 0.5) d.edges.emplace_back(i, j);

        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[static_cast<std::size_t>(prng.below(i))]);
        DualGraph dp;
        dp.n = n;
        dp.features.resize(static_cast<std::size_t>(n));
        dp.node_ids.resize(static_cast<std::size_t>(n));
        dp.lengths.assign(static_cast<std::size_t>(n), 1.0);
        for (int i = 0; i < n; ++i) {
            dp.features[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
                d.features[static_cast<std::size_t>(i)];
            dp.node_ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
                d.node_ids[static_cast<std::size_t>(i)];
        }
        for (const auto& [a, b] : d.edges)
            dp.edges.emplace_back(perm[static_cast<std::size_t>(a)],
                                  perm[static_cast<std::size_t>(b)]);
        const GatModel model = GatModel::create(4, hyper, 600 + trial);
        const auto s = predict(model, d);
        const auto sp = predict(model, dp);
        for (int i = 0; i < n; ++i)
            c.require(s[static_cast<std::size_t>(i)] ==
                          sp[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])],
                      "permutation equivariance not exact");
    }

    // finite differences over every parameter of all 5 layers
    const double step = 1e-4;
    int graphs = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 22; ++seed) {
        Rng rng(split_seed(900, seed));
        const int n = 3 + static_cast<int>(rng.below(6));
        GatGraph g = random_gat_graph(rng, n, 4);
        Eigen::VectorXd targets(n);
        for (int i = 0; i < n; ++i) targets(i) = rng.uniform(0.1, 0.9);
        GatModel model = GatModel::create(4, hyper, split_seed(901, seed));
        GatGrads grads = GatGrads::zeros_like(model);
        backward(model, g, targets, grads);
        auto fd_check = [&](double& p, double analytic) {
            const double orig = p;
            p = orig + step;
            const double lp = bce_loss(forward_scores(model, g), targets).loss;
            p = orig - step;
            const double lm = bce_loss(forward_scores(model, g), targets).loss;
            p = orig;
            const double fd = (lp - lm) / (2.0 * step);
            const double rel =
                std::abs(analytic - fd) / std::max(1e-6, std::abs(analytic) + std::abs(fd));
            worst = std::max(worst, rel);
        };
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            auto& layer = model.layers[l];
            for (int k = 0; k < layer.heads; ++k) {
                auto& W = layer.W[static_cast<std::size_t>(k)];
                for (int r = 0; r < W.rows(); ++r)
                    for (int col = 0; col < W.cols(); ++col)
                        fd_check(W(r, col), grads.dW[l][static_cast<std::size_t>(k)](r, col));
                auto& a = layer.a[static_cast<std::size_t>(k)];
                for (int i = 0; i < a.size(); ++i)
                    fd_check(a(i), grads.da[l][static_cast<std::size_t>(k)](i));
            }
        }
        ++graphs;
    }
    c.require(graphs >= 20, "need at least 20 gradient-check graphs");
    c.require(worst < 1e-4, "finite-difference relative error " + g9(worst));
    c.notes.push_back("fd worst rel err " + g9(worst));
}

// ---- criterion 3: dual-graph oracles ------------------------------------

void criterion_dualgraph(Criterion& c) {
    const SegmentSet chain = segment_branches(chain_tree(11.0), 5.0);
    c.require(chain.segments.size() == 3, "11 mm chain must cut into 3 segments");
    if (chain.segments.size() == 3) {
        c.require(std::abs(chain.segments[0].length - 5.0) <= 1e-9, "first piece must be 5 mm");
        c.require(std::abs(chain.segments[1].length - 5.0) <= 1e-9, "second piece must be 5 mm");
        c.require(std::abs(chain.segments[2].length - 1.0) <= 1e-9, "last piece must be 1 mm");
    }

    VesselTree y;
    long long id = 1;
    for (double x = 0.0; x <= 4.0 + 1e-9; x += 1.0)
        y.nodes.push_back({id, 2, Vec3(x, 0, 0), 1.0, id == 1 ? -1 : id - 1}), ++id;
    const long long junction = id - 1;
    long long prev = junction;
    for (int k = 1; k <= 4; ++k)
        y.nodes.push_back({id, 2, Vec3(4.0, k * 1.0, 0), 1.0, prev}), prev = id, ++id;
    prev = junction;
    for (int k = 1; k <= 4; ++k)
        y.nodes.push_back({id, 2, Vec3(4.0, -k * 1.0, 0), 1.0, prev}), prev = id, ++id;
    const DualGraph dual = build_dual(segment_branches(y, 5.0));
    c.require(dual.n == 3, "Y junction must give 3 dual nodes");
    c.require(dual.edges.size() == 3, "Y junction must give 3 dual edges");

    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const VesselTree forest = resample_polyline(generate_forest(scene_params(seed)), 1.0);
        const SegmentSet set = segment_branches(forest, 5.0);
        double total = 0.0;
        for (const auto& s : set.segments) total += s.length;
        if (std::abs(total - forest.total_length()) > 1e-6) {
            c.require(false, "length conservation broke at seed " + std::to_string(seed));
            break;
        }
    }
}

// ---- criterion 4: target monotonicity -----------------------------------

void criterion_targets(Criterion& c) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const VesselTree gt = resample_polyline(generate_forest(scene_params(seed)), 1.0);
        const VesselTree probe =
            resample_polyline(generate_forest(scene_params(seed + 400)), 1.0);
        const SegmentSet set = segment_branches(probe, 5.0);
        std::vector<double> prev(set.segments.size(), -1.0);
        for (double nmd : {3.0, 7.0, 11.0, 15.0}) {
            const auto g = label_targets(set, gt, nmd);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (g[i] < prev[i]) {
                    c.require(false, "G(i) decreased with nmd at seed " + std::to_string(seed));
                    return;
                }
            }
            prev = g;
        }
    }
}

// ---- criterion 5: metric oracles ----------------------------------------

void criterion_metrics(Criterion& c) {
    for (std::uint64_t seed : {2u, 5u, 11u, 23u}) {
        VesselTree a = resample_polyline(generate_forest(scene_params(seed)), 1.0);
        VesselTree b = resample_polyline(generate_forest(scene_params(seed + 100)), 1.0);
        if (a.nodes.size() > 200) a.nodes.resize(200);
        if (b.nodes.size() > 200) b.nodes.resize(200);
        const PolylineIndex index(b);
        double worst = 0.0;
        for (const auto& n : a.nodes)
            worst = std::max(worst, std::abs(index.nearest_distance(n.pos) -
                                             index.nearest_distance_exhaustive(n.pos)));
        c.require(worst <= 1e-9, "accelerated vs exhaustive distance differ by " + g9(worst));
    }

    const VesselTree base = straight_line_nodes(0.0, 10);
    const SpatialMetrics m3 = spatial_metrics(base, straight_line_nodes(3.0, 10), 2.0);
    c.require(m3.valid, "parallel-line case must be valid");
    c.require(std::abs(m3.sd - 3.0) <= 1e-9, "SD must be 3");
    c.require(std::abs(m3.ssd - 3.0) <= 1e-9, "SSD must be 3");
    c.require(std::abs(m3.pssd - 1.0) <= 1e-9, "pSSD must be 1");
}

// ---- criterion 6: end-to-end pruning benefit ----------------------------

void criterion_end_to_end(Criterion& c, const fs::path& config_path, const fs::path& out) {
    const PipelineConfig cfg = config_load(config_path);
    c.require(cfg.bench.train_scenes == 50 && cfg.bench.test_scenes == 10,
              "benchmark must ship 50 train + 10 test scenes");
    c.require(cfg.corrupt.spurious_count >= 3, "benchmark must inject >= 3 spurious tubes");
    fs::remove_all(out);
    run_pipeline(cfg, out, true);
    // every scene really received at least 3 spurious tubes
    for (const auto& scene : scene_list(cfg)) {
        const auto manifest = nlohmann::json::parse(
            read_file(scene_dir(out, scene) / "manifest_heatmap.json"));
        const int placed = manifest.at("notes").at("spurious_tubes_placed").get<int>();
        if (placed < 3) {
            c.require(false, scene.name + " only received " + std::to_string(placed) + " tubes");
            break;
        }
    }
    const RunSummary s = read_summary(out);
    const double df1 = s.pruned_mean.f1 - s.baseline_mean.f1;
    const double dprec = s.pruned_mean.precision - s.baseline_mean.precision;
    const double drec = s.pruned_mean.recall - s.baseline_mean.recall;
    c.notes.push_back("baseline P/R/F1 " + g9(s.baseline_mean.precision) + "/" +
                      g9(s.baseline_mean.recall) + "/" + g9(s.baseline_mean.f1));
    c.notes.push_back("pruned   P/R/F1 " + g9(s.pruned_mean.precision) + "/" +
                      g9(s.pruned_mean.recall) + "/" + g9(s.pruned_mean.f1));
    c.require(df1 >= 0.03, "F1 gain " + g9(df1) + " < 0.03");
    c.require(dprec >= 0.08, "precision gain " + g9(dprec) + " < 0.08");
    c.require(drec >= -0.10, "recall drop " + g9(-drec) + " > 0.10");
}

// ---- criterion 7: pruning monotonicity ----------------------------------

void criterion_prune_monotone(Criterion& c, const fs::path& bench_out,
                              const PipelineConfig& cfg) {
    // reuse the benchmark artifacts of the first test scene
    SceneRef scene;
    for (const auto& s : scene_list(cfg))
        if (s.is_test) {
            scene = s;
            break;
        }
    const fs::path dir = scene_dir(bench_out, scene);
    const DualGraph dual = dualgraph_from_json(read_file(dir / "dualgraph.json"));
    const VesselTree forest = swc_read(dir / "traced_resampled.swc");
    const GatModel model = checkpoint_load(bench_out / "model" / "model.ckpt");
    const std::vector<double> scores = predict(model, dual);

    SegmentSet set;
    for (int i = 0; i < dual.n; ++i) {
        Segment seg;
        seg.id = i;
        seg.node_ids = dual.node_ids.at(static_cast<std::size_t>(i));
        set.segments.push_back(std::move(seg));
    }
    std::size_t prev = forest.nodes.size() + 1;
    for (int k = 0; k <= 20; ++k) {
        const double thr = static_cast<double>(k) / 20.0;
        const VesselTree pruned = prune(forest, set, scores, thr);
        c.require(pruned.nodes.size() <= prev,
                  "survivors grew between thresholds at k=" + std::to_string(k));
        prev = pruned.nodes.size();
        if (k == 0) c.require(pruned.nodes.size() == forest.nodes.size(),
                              "threshold 0 must keep everything");
        if (k == 20) c.require(pruned.empty(), "threshold 1 must remove everything");
    }
}

// ---- criterion 8: determinism -------------------------------------------

void criterion_determinism(Criterion& c, const fs::path& root) {
    PipelineConfig cfg = config_from_json_text(R"({
      "seed": 777,
      "synth": {"n_trees": 1, "depth": 2, "branch_len_min_mm": 8, "branch_len_max_mm": 12,
                "dims": [56, 56, 56], "margin_mm": 6.0},
      "corrupt": {"spurious_count": 3, "spurious_len_mm": 12.0, "clearance_mm": 7.0,
                  "noise_sigma": 0.03, "dropout_count": 1},
      "gat": {"epochs": 60, "learning_rate": 0.002, "hidden_dim": 8, "heads": 2},
      "benchmark": {"train_scenes": 4, "test_scenes": 2}
    })");
    const fs::path a = root / "determinism_a";
    const fs::path b = root / "determinism_b";
    fs::remove_all(a);
    fs::remove_all(b);
    run_pipeline(cfg, a, false);
    run_pipeline(cfg, b, false);

    int compared = 0;
    for (const auto& scene : scene_list(cfg)) {
        const fs::path da = scene_dir(a, scene);
        const fs::path db = scene_dir(b, scene);
        for (const char* name : {"gt.swc", "traced.swc", "traced_resampled.swc"}) {
            c.require(read_file(da / name) == read_file(db / name),
                      std::string(name) + " differs for " + scene.name);
            ++compared;
        }
        if (scene.is_test) {
            for (const char* name : {"pruned.swc", "report_baseline.json", "report_pruned.json"}) {
                c.require(read_file(da / name) == read_file(db / name),
                          std::string(name) + " differs for " + scene.name);
                ++compared;
            }
        }
    }
    c.require(read_file(a / "model" / "model.ckpt") == read_file(b / "model" / "model.ckpt"),
              "checkpoint differs");
    c.require(read_file(a / "reports" / "summary.json") ==
                  read_file(b / "reports" / "summary.json"),
              "summary differs");
    c.notes.push_back(std::to_string(compared + 2) + " artifacts byte-compared");
}

}  // namespace

int main(int argc, char** argv) {
    fs::path data_dir = ".";
    fs::path out_dir = fs::temp_directory_path() / "vprune_acceptance";
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--data-dir") data_dir = argv[i + 1];
        if (flag == "--out") out_dir = argv[i + 1];
    }
    fs::create_directories(out_dir);

    std::vector<Criterion> criteria;
    auto run = [&criteria](int id, const std::string& label, double budget_s, auto&& fn) {
        Criterion c{id, label};
        Timer timer;
        try {
            fn(c);
        } catch (const std::exception& e) {
            c.require(false, std::string("exception: ") + e.what());
        }
        c.seconds = timer.seconds();
        if (budget_s > 0.0)
            c.require(c.seconds < budget_s,
                      "runtime " + g9(c.seconds) + "s exceeds " + g9(budget_s) + "s");
        std::printf("%s criterion %d: %s (%.1fs)\n", c.passed ? "PASS" : "FAIL", c.id,
                    c.label.c_str(), c.seconds);
        for (const auto& n : c.notes) std::printf("       - %s\n", n.c_str());
        std::fflush(stdout);
        criteria.push_back(std::move(c));
    };

    const fs::path bench_config = data_dir / "configs" / "benchmark.json";
    const fs::path bench_out = out_dir / "benchmark";

    run(1, "heatmap closed-form exactness and brute-force distance oracle", 10.0, criterion_heatmap);
    run(2, "GAT attention, equivariance and gradient checks", 60.0, criterion_gat);
    run(3, "dual-graph segmentation oracles", 30.0, criterion_dualgraph);
    run(4, "target monotonicity across matching distances", 0.0, criterion_targets);
    run(5, "metric oracles", 0.0, criterion_metrics);
    run(6, "end-to-end pruning benefit on the shipped benchmark", 900.0,
        [&](Criterion& c) { criterion_end_to_end(c, bench_config, bench_out); });
    run(7, "pruning monotonicity over a 21-point threshold sweep", 0.0, [&](Criterion& c) {
        criterion_prune_monotone(c, bench_out, config_load(bench_config));
    });
    run(8, "byte-identical artifacts across two pipeline runs", 0.0,
        [&](Criterion& c) { criterion_determinism(c, out_dir); });

    int failed = 0;
    for (const auto& c : criteria) failed += c.passed ? 0 : 1;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
                criteria.size());
    return failed == 0 ? 0 : 1;
}

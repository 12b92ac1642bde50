#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "vprune/dualgraph.hpp"
#include "vprune/pipeline.hpp"
#include "vprune/volume_io.hpp"
#include "vprune/rng.hpp"
#include "vprune/swc.hpp"
#include "vprune/util.hpp"

using namespace vprune;
namespace fs = std::filesystem;

namespace {

// small but complete configuration: two training scenes, one test scene
std::string tiny_config_text() {
    return R"({
  "seed": 424242,
  "synth": {"n_trees": 1, "depth": 1, "branch_len_min_mm": 10, "branch_len_max_mm": 14,
            "dims": [48, 48, 48], "margin_mm": 6.0},
  "corrupt": {"noise_sigma": 0.02, "dropout_count": 0, "spurious_count": 2,
              "spurious_len_mm": 10.0, "clearance_mm": 7.0},
  "gat": {"epochs": 30, "learning_rate": 0.005, "hidden_dim": 4, "heads": 2},
  "benchmark": {"train_scenes": 2, "test_scenes": 1}
})";
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("config defaults carry the published hyperparameters") {
    const PipelineConfig cfg = config_from_json_text("{}");
    CHECK(cfg.heatmap.alpha == 6.0);
    CHECK(cfg.heatmap.d_max_mm == 5.0);
    CHECK(cfg.dual.sampling_length_mm == 5.0);
    CHECK(cfg.dual.nmd_mm == 3.0);
    CHECK(cfg.gat.threshold == 0.5);
    CHECK(cfg.gat.learning_rate == 5e-6);
    CHECK(cfg.gat.weight_decay == 5e-4);
    CHECK(cfg.eval.catch_dist_mm == 4.0);
}

TEST_CASE("config validation is path-qualified") {
    try {
        config_from_json_text(R"({"synth": {"radius_decay": 1.5}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("synth.radius_decay") != std::string::npos);
    }
    try {
        config_from_json_text(R"({"gat": {"learning_rate": "fast"}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("gat.learning_rate") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json_text("{nope"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"tracer": {"binarize_threshold": 1.2}})"),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"eval": {"catch_dist_mm": -1}})"), ConfigError);
}

TEST_CASE("config hash is stable and seed-sensitive") {
    const PipelineConfig a = config_from_json_text("{}");
    const PipelineConfig b = config_from_json_text("{}");
    CHECK(a.config_hash() == b.config_hash());
    PipelineConfig c = a;
    c.seed = 999;
    CHECK(c.config_hash() != a.config_hash());
}

TEST_CASE("seed splitter separates streams") {
    const auto a = split_seed(1, 1, 0);
    const auto b = split_seed(1, 2, 0);
    const auto c = split_seed(1, 1, 1);
    const auto d = split_seed(2, 1, 0);
    CHECK(a != b);
    CHECK(a != c);
    CHECK(a != d);
    CHECK(split_seed(1, 1, 0) == a);
}

TEST_CASE("synth stage is byte-identical across runs") {
    const PipelineConfig cfg = config_from_json_text(tiny_config_text());
    TempDir t1("vprune_synth_a"), t2("vprune_synth_b");
    run_synth(cfg, t1.path, false);
    run_synth(cfg, t2.path, false);
    const auto scene = scene_list(cfg).front();
    const auto f1 = scene_dir(t1.path, scene) / "gt.swc";
    const auto f2 = scene_dir(t2.path, scene) / "gt.swc";
    CHECK(read_file(f1) == read_file(f2));
    // different seeds give different scenes
    PipelineConfig other = cfg;
    other.seed = 7;
    TempDir t3("vprune_synth_c");
    run_synth(other, t3.path, false);
    CHECK(read_file(scene_dir(t3.path, scene) / "gt.swc") != read_file(f1));
}

TEST_CASE("stages write manifests and strict mode verifies hashes") {
    const PipelineConfig cfg = config_from_json_text(tiny_config_text());
    TempDir tmp("vprune_strict");
    run_synth(cfg, tmp.path, false);
    run_heatmap(cfg, tmp.path, true);  // strict verification against synth manifests

    const auto scene = scene_list(cfg).front();
    const fs::path dir = scene_dir(tmp.path, scene);
    CHECK(fs::exists(dir / "manifest_synth.json"));
    CHECK(fs::exists(dir / "manifest_heatmap.json"));

    // tamper with an upstream artifact: strict mode must refuse
    std::ofstream(dir / "gt.swc", std::ios::app) << "# tampered\n";
    CHECK_THROWS_AS(run_heatmap(cfg, tmp.path, true), MissingInputError);
    // non-strict keeps going
    run_heatmap(cfg, tmp.path, false);
}

TEST_CASE("missing upstream artifacts are reported") {
    const PipelineConfig cfg = config_from_json_text(tiny_config_text());
    TempDir tmp("vprune_missing");
    CHECK_THROWS_AS(run_trace(cfg, tmp.path, false), MissingInputError);
}

TEST_CASE("full tiny pipeline runs, is reproducible, and stages are isolated") {
    const PipelineConfig cfg = config_from_json_text(tiny_config_text());
    TempDir t1("vprune_pipe_a"), t2("vprune_pipe_b");
    run_pipeline(cfg, t1.path, true);
    run_pipeline(cfg, t2.path, true);

    const SceneRef test_scene = scene_list(cfg).back();
    REQUIRE(test_scene.is_test);
    const fs::path d1 = scene_dir(t1.path, test_scene);
    const fs::path d2 = scene_dir(t2.path, test_scene);
    for (const char* name : {"gt.swc", "traced.swc", "pruned.swc", "report_pruned.json"})
        CHECK(read_file(d1 / name) == read_file(d2 / name));
    CHECK(read_file(t1.path / "model" / "model.ckpt") ==
          read_file(t2.path / "model" / "model.ckpt"));
    CHECK(read_file(t1.path / "reports" / "summary.json") ==
          read_file(t2.path / "reports" / "summary.json"));

    // stage isolation: re-running a downstream stage leaves upstream bytes alone
    const std::string gt_before = read_file(d1 / "gt.swc");
    const std::string traced_before = read_file(d1 / "traced.swc");
    run_eval(cfg, t1.path, false);
    CHECK(read_file(d1 / "gt.swc") == gt_before);
    CHECK(read_file(d1 / "traced.swc") == traced_before);

    const RunSummary summary = read_summary(t1.path);
    CHECK(summary.pruned_mean.total_pred > 0);
}

#ifdef VESSELPRUNE_BIN
namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(VESSELPRUNE_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli exit codes and seed override") {
    TempDir tmp("vprune_cli");
    const fs::path cfg_path = tmp.path / "config.json";
    write_file(cfg_path, tiny_config_text());

    CHECK(run_cli("--help") == 0);

    // config errors exit with 2
    const fs::path bad_cfg = tmp.path / "bad.json";
    write_file(bad_cfg, R"({"synth": {"radius_decay": 9.0}})");
    CHECK(run_cli("synth --config " + bad_cfg.string() + " --out " + tmp.path.string()) == 2);
    CHECK(run_cli("synth --config " + (tmp.path / "absent.json").string() + " --out " +
                  tmp.path.string()) == 3);

    // missing upstream input exits with 3
    CHECK(run_cli("trace --config " + cfg_path.string() + " --out " +
                  (tmp.path / "empty_run").string()) == 3);

    // happy path plus --seed override changing the artifacts
    const fs::path out_a = tmp.path / "a";
    const fs::path out_b = tmp.path / "b";
    CHECK(run_cli("synth --config " + cfg_path.string() + " --out " + out_a.string()) == 0);
    CHECK(run_cli("synth --config " + cfg_path.string() + " --out " + out_b.string() +
                  " --seed 99") == 0);
    const PipelineConfig cfg = config_from_json_text(tiny_config_text());
    const auto scene = scene_list(cfg).front();
    CHECK(read_file(scene_dir(out_a, scene) / "gt.swc") !=
          read_file(scene_dir(out_b, scene) / "gt.swc"));
}
#endif

TEST_CASE("external feature volumes replace the filter proxy") {
    PipelineConfig cfg = config_from_json_text(tiny_config_text());
    TempDir tmp("vprune_extfeat");
    run_synth(cfg, tmp.path, false);
    run_heatmap(cfg, tmp.path, false);
    run_trace(cfg, tmp.path, false);

    // two constant feature layers; every segment must aggregate exactly them
    const fs::path f1 = tmp.path / "feat_a.cvol";
    const fs::path f2 = tmp.path / "feat_b.cvol";
    cvol_write(f1, ScalarVolume(cfg.synth.dims, cfg.synth.spacing, 0.25));
    cvol_write(f2, ScalarVolume(cfg.synth.dims, cfg.synth.spacing, 0.75));
    cfg.dual.feature_volumes = {f1.string(), f2.string()};
    run_featurize(cfg, tmp.path, false);

    const auto scene = scene_list(cfg).front();
    const DualGraph dual =
        dualgraph_from_json(read_file(scene_dir(tmp.path, scene) / "dualgraph.json"));
    REQUIRE(dual.n > 0);
    for (const auto& f : dual.features) {
        REQUIRE(f.size() == 2);
        CHECK(f[0] == doctest::Approx(0.25).epsilon(1e-9));
        CHECK(f[1] == doctest::Approx(0.75).epsilon(1e-9));
    }

    // missing feature file is a missing-input error
    cfg.dual.feature_volumes = {(tmp.path / "absent.cvol").string()};
    CHECK_THROWS_AS(run_featurize(cfg, tmp.path, false), MissingInputError);
}

TEST_CASE("sweep emits monotone tables on the threshold axis") {
    PipelineConfig cfg = config_from_json_text(tiny_config_text());
    cfg.gat.epochs = 10;
    TempDir tmp("vprune_sweep");
    const auto rows = run_sweep(cfg, "threshold", {0.0, 0.5, 1.0}, tmp.path, false);
    REQUIRE(rows.size() == 3);
    CHECK(fs::exists(tmp.path / "sweep" / "sweep_table.json"));
    CHECK(fs::exists(tmp.path / "sweep" / "sweep_table.txt"));
    // surviving node count is monotone non-increasing in the threshold
    CHECK(rows[0].pruned_mean.total_pred >= rows[1].pruned_mean.total_pred);
    CHECK(rows[1].pruned_mean.total_pred >= rows[2].pruned_mean.total_pred);
    // threshold 0 keeps everything, threshold 1 removes everything
    CHECK(rows[0].pruned_mean.total_pred == rows[0].baseline_mean.total_pred);
    CHECK(rows[2].pruned_mean.total_pred == 0);

    CHECK_THROWS_AS(run_sweep(cfg, "bogus", {1.0}, tmp.path, false), ConfigError);
    CHECK_THROWS_AS(run_sweep(cfg, "nmd", {}, tmp.path, false), ConfigError);
}

TEST_CASE("sweep runs the matching-distance and sampling-length axes") {
    PipelineConfig cfg = config_from_json_text(tiny_config_text());
    cfg.gat.epochs = 10;
    TempDir tmp("vprune_sweep_axes");
    const auto nmd_rows = run_sweep(cfg, "nmd", {3.0, 7.0}, tmp.path / "nmd", false);
    REQUIRE(nmd_rows.size() == 2);
    const auto sl_rows =
        run_sweep(cfg, "sampling_length", {5.0, 15.0}, tmp.path / "sl", false);
    REQUIRE(sl_rows.size() == 2);
    // both axes rerun the whole pipeline per value; reports must be complete
    for (const auto& rows : {nmd_rows, sl_rows})
        for (const auto& r : rows) CHECK(r.baseline_mean.total_gt > 0);
}

TEST_SUITE_END();

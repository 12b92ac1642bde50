#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vprune/config.hpp"
#include "vprune/metrics.hpp"

namespace vprune {

// stage identifiers double as seed streams
enum class Stage { Synth = 1, Heatmap, Trace, Featurize, Train, Prune, Eval };

const char* stage_name(Stage s);

struct SceneRef {
    std::string name;           // "train_000", "test_003", ...
    std::uint64_t scene_stream; // seed stream index
    bool is_test = false;
};

std::vector<SceneRef> scene_list(const PipelineConfig& cfg);
std::filesystem::path scene_dir(const std::filesystem::path& out, const SceneRef& scene);

// Per-stage entry points. Each writes its artifacts plus a manifest
// (config hash, seed, tool version, input and output hashes) into every
// directory it touches. With strict=true, input hashes are verified against
// the manifests of the producing stages.
void run_synth(const PipelineConfig& cfg, const std::filesystem::path& out, bool strict);
void run_heatmap(const PipelineConfig& cfg, const std::filesystem::path& out, bool strict);
void run_trace(const PipelineConfig& cfg, const std::filesystem::path& out, bool strict);
void run_featurize(const PipelineConfig& cfg, const std::filesystem::path& out, bool strict);
void run_train(const PipelineConfig& cfg, const std::filesystem::path& out, bool strict);
void run_prune(const PipelineConfig& cfg, const std::filesystem::path& out, bool strict);
void run_eval(const PipelineConfig& cfg, const std::filesystem::path& out, bool strict);
void run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out, bool strict);

struct SweepRow {
    double value = 0.0;
    MetricReport pruned_mean;
    MetricReport baseline_mean;
};

// One full pipeline per axis value (axis in {nmd, sampling_length,
// threshold}), seeds held fixed; emits sweep_table.json / sweep_table.txt
// under out/.
std::vector<SweepRow> run_sweep(const PipelineConfig& cfg, const std::string& axis,
                                const std::vector<double>& values,
                                const std::filesystem::path& out, bool strict);

// Mean test-scene reports of a finished run (reports/summary.json).
struct RunSummary {
    MetricReport baseline_mean;
    MetricReport pruned_mean;
};
RunSummary read_summary(const std::filesystem::path& out);

}  // namespace vprune

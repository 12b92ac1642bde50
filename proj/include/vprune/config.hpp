#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "vprune/gat.hpp"
#include "vprune/heatmap.hpp"
#include "vprune/metrics.hpp"
#include "vprune/synth.hpp"
#include "vprune/tracer.hpp"

namespace vprune {

struct DualParams {
    double sampling_length_mm = 5.0;
    double nmd_mm = 3.0;
    double resample_step_mm = 1.0;
    // when set, these cvol files replace the built-in filter layers as the
    // feature stack (e.g. externally computed CNN features)
    std::vector<std::string> feature_volumes;

    void validate() const {
        if (!(sampling_length_mm > 0.0))
            throw ConfigError("dualgraph.sampling_length_mm: must be positive");
        if (!(nmd_mm > 0.0)) throw ConfigError("dualgraph.nmd_mm: must be positive");
        if (!(resample_step_mm > 0.0))
            throw ConfigError("dualgraph.resample_step_mm: must be positive");
    }
};

struct BenchParams {
    int train_scenes = 50;
    int test_scenes = 10;

    void validate() const {
        if (train_scenes < 1) throw ConfigError("benchmark.train_scenes: must be >= 1");
        if (test_scenes < 1) throw ConfigError("benchmark.test_scenes: must be >= 1");
    }
};

struct PipelineConfig {
    std::uint64_t seed = 20240801;
    SynthParams synth;
    HeatmapParams heatmap;
    CorruptParams corrupt;
    TracerParams tracer;
    DualParams dual;
    GatHyper gat;
    EvalParams eval;
    BenchParams bench;

    void validate() const;

    // canonical serialization (sorted keys, all fields); its hash identifies
    // the configuration in manifests
    std::string canonical_json() const;
    std::string config_hash() const;
};

// Parses and validates; throws ConfigError with a path-qualified message on
// bad types or out-of-domain values.
PipelineConfig config_from_json_text(const std::string& text);
PipelineConfig config_load(const std::filesystem::path& path);

}  // namespace vprune

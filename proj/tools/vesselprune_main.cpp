#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vprune/pipeline.hpp"

namespace {

// exit codes: 0 ok, 2 config error, 3 missing/unreadable input, 4 numerical
// failure, 1 anything else
int run_guarded(const std::function<void()>& fn) {
    try {
        fn();
        return 0;
    } catch (const vprune::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const vprune::MissingInputError& e) {
        std::fprintf(stderr, "missing input: %s\n", e.what());
        return 3;
    } catch (const vprune::ParseError& e) {
        std::fprintf(stderr, "input parse error: %s\n", e.what());
        return 3;
    } catch (const vprune::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const vprune::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vessel tree tracing and graph-attention branch pruning"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed_override = 0;
    bool has_seed = false;
    bool strict = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config JSON")->required();
        cmd->add_option("--out", out_dir, "output directory (default: out)");
        cmd->add_option("--seed", seed_override, "override the config seed")
            ->each([&](const std::string&) { has_seed = true; });
        cmd->add_flag("--strict", strict, "verify input hashes against manifests");
    };

    const std::vector<std::pair<std::string, void (*)(const vprune::PipelineConfig&,
                                                      const std::filesystem::path&, bool)>>
        stages = {{"synth", vprune::run_synth},       {"heatmap", vprune::run_heatmap},
                  {"trace", vprune::run_trace},       {"featurize", vprune::run_featurize},
                  {"train", vprune::run_train},       {"prune", vprune::run_prune},
                  {"eval", vprune::run_eval},         {"pipeline", vprune::run_pipeline}};

    for (const auto& [name, fn] : stages) add_common(app.add_subcommand(name));

    auto* sweep = app.add_subcommand("sweep");
    add_common(sweep);
    std::string axis;
    std::vector<double> values;
    sweep->add_option("--axis", axis, "nmd | sampling_length | threshold")->required();
    sweep->add_option("--values", values, "axis values")->required()->expected(-1);

    CLI11_PARSE(app, argc, argv);

    return run_guarded([&] {
        vprune::PipelineConfig cfg = vprune::config_load(config_path);
        if (has_seed) cfg.seed = seed_override;

        for (const auto& [name, fn] : stages) {
            if (app.get_subcommand(name)->parsed()) {
                fn(cfg, out_dir, strict);
                return;
            }
        }
        if (sweep->parsed()) {
            const auto rows = vprune::run_sweep(cfg, axis, values, out_dir, strict);
            std::printf("%zu sweep points written under %s/sweep\n", rows.size(),
                        out_dir.c_str());
        }
    });
}

#include "vprune/config.hpp"

#include <json.hpp>

#include "vprune/util.hpp"

namespace vprune {

namespace {

using nlohmann::json;

// typed field access with a path-qualified error message
template <typename T>
void read_field(const json& j, const std::string& section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(section + "." + key + ": wrong type");
    }
}

void read_synth(const json& j, SynthParams& p) {
    read_field(j, "synth", "n_trees", p.n_trees);
    read_field(j, "synth", "depth", p.depth);
    read_field(j, "synth", "branch_len_min_mm", p.branch_len_min_mm);
    read_field(j, "synth", "branch_len_max_mm", p.branch_len_max_mm);
    read_field(j, "synth", "branch_angle_min_deg", p.branch_angle_min_deg);
    read_field(j, "synth", "branch_angle_max_deg", p.branch_angle_max_deg);
    read_field(j, "synth", "radius_root_mm", p.radius_root_mm);
    read_field(j, "synth", "radius_decay", p.radius_decay);
    read_field(j, "synth", "margin_mm", p.margin_mm);
    if (j.contains("dims")) {
        std::vector<int> dims;
        read_field(j, "synth", "dims", dims);
        if (dims.size() != 3) throw ConfigError("synth.dims: expected 3 entries");
        p.dims = GridDims{dims[0], dims[1], dims[2]};
    }
    if (j.contains("spacing_mm")) {
        std::vector<double> s;
        read_field(j, "synth", "spacing_mm", s);
        if (s.size() != 3) throw ConfigError("synth.spacing_mm: expected 3 entries");
        p.spacing = Vec3(s[0], s[1], s[2]);
    }
}

}  // namespace

void PipelineConfig::validate() const {
    synth.validate();
    heatmap.validate();
    corrupt.validate();
    tracer.validate();
    dual.validate();
    gat.validate();
    eval.validate();
    bench.validate();
    if (synth.margin_mm < heatmap.d_max_mm)
        throw ConfigError("synth.margin_mm: must be >= heatmap.d_max_mm so heatmaps stay in bounds");
}

std::string PipelineConfig::canonical_json() const {
    json j;
    j["seed"] = seed;
    j["synth"] = {{"n_trees", synth.n_trees},
                  {"depth", synth.depth},
                  {"branch_len_min_mm", synth.branch_len_min_mm},
                  {"branch_len_max_mm", synth.branch_len_max_mm},
                  {"branch_angle_min_deg", synth.branch_angle_min_deg},
                  {"branch_angle_max_deg", synth.branch_angle_max_deg},
                  {"radius_root_mm", synth.radius_root_mm},
                  {"radius_decay", synth.radius_decay},
                  {"margin_mm", synth.margin_mm},
                  {"dims", {synth.dims.nx, synth.dims.ny, synth.dims.nz}},
                  {"spacing_mm", {synth.spacing.x(), synth.spacing.y(), synth.spacing.z()}}};
    j["heatmap"] = {{"alpha", heatmap.alpha}, {"d_max_mm", heatmap.d_max_mm}};
    j["corrupt"] = {{"noise_sigma", corrupt.noise_sigma},
                    {"dropout_count", corrupt.dropout_count},
                    {"dropout_radius_mm", corrupt.dropout_radius_mm},
                    {"spurious_count", corrupt.spurious_count},
                    {"spurious_len_mm", corrupt.spurious_len_mm},
                    {"spurious_intensity", corrupt.spurious_intensity},
                    {"clearance_mm", corrupt.clearance_mm}};
    j["tracer"] = {{"binarize_threshold", tracer.binarize_threshold},
                   {"dilation_radius_vox", tracer.dilation_radius_vox},
                   {"min_component_voxels", tracer.min_component_voxels},
                   {"coverage_stop", tracer.coverage_stop},
                   {"min_branch_len_mm", tracer.min_branch_len_mm},
                   {"step_size_mm", tracer.step_size_mm}};
    j["dualgraph"] = {{"sampling_length_mm", dual.sampling_length_mm},
                      {"nmd_mm", dual.nmd_mm},
                      {"resample_step_mm", dual.resample_step_mm},
                      {"feature_volumes", dual.feature_volumes}};
    j["gat"] = {{"heads", gat.heads},
                {"hidden_dim", gat.hidden_dim},
                {"learning_rate", gat.learning_rate},
                {"weight_decay", gat.weight_decay},
                {"epochs", gat.epochs},
                {"threshold", gat.threshold}};
    j["eval"] = {{"catch_dist_mm", eval.catch_dist_mm},
                 {"sig_dist_mm", eval.sig_dist_mm},
                 {"resample_step_mm", eval.resample_step_mm}};
    j["benchmark"] = {{"train_scenes", bench.train_scenes}, {"test_scenes", bench.test_scenes}};
    return j.dump(2) + "\n";
}

std::string PipelineConfig::config_hash() const { return fnv1a64_hex(canonical_json()); }

PipelineConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid json: ") + e.what());
    }
    PipelineConfig cfg;
    read_field(j, "config", "seed", cfg.seed);
    if (j.contains("synth")) read_synth(j.at("synth"), cfg.synth);
    if (j.contains("heatmap")) {
        const auto& h = j.at("heatmap");
        read_field(h, "heatmap", "alpha", cfg.heatmap.alpha);
        read_field(h, "heatmap", "d_max_mm", cfg.heatmap.d_max_mm);
    }
    if (j.contains("corrupt")) {
        const auto& c = j.at("corrupt");
        read_field(c, "corrupt", "noise_sigma", cfg.corrupt.noise_sigma);
        read_field(c, "corrupt", "dropout_count", cfg.corrupt.dropout_count);
        read_field(c, "corrupt", "dropout_radius_mm", cfg.corrupt.dropout_radius_mm);
        read_field(c, "corrupt", "spurious_count", cfg.corrupt.spurious_count);
        read_field(c, "corrupt", "spurious_len_mm", cfg.corrupt.spurious_len_mm);
        read_field(c, "corrupt", "spurious_intensity", cfg.corrupt.spurious_intensity);
        read_field(c, "corrupt", "clearance_mm", cfg.corrupt.clearance_mm);
    }
    if (j.contains("tracer")) {
        const auto& t = j.at("tracer");
        read_field(t, "tracer", "binarize_threshold", cfg.tracer.binarize_threshold);
        read_field(t, "tracer", "dilation_radius_vox", cfg.tracer.dilation_radius_vox);
        read_field(t, "tracer", "min_component_voxels", cfg.tracer.min_component_voxels);
        read_field(t, "tracer", "coverage_stop", cfg.tracer.coverage_stop);
        read_field(t, "tracer", "min_branch_len_mm", cfg.tracer.min_branch_len_mm);
        read_field(t, "tracer", "step_size_mm", cfg.tracer.step_size_mm);
    }
    if (j.contains("dualgraph")) {
        const auto& d = j.at("dualgraph");
        read_field(d, "dualgraph", "sampling_length_mm", cfg.dual.sampling_length_mm);
        read_field(d, "dualgraph", "nmd_mm", cfg.dual.nmd_mm);
        read_field(d, "dualgraph", "resample_step_mm", cfg.dual.resample_step_mm);
        read_field(d, "dualgraph", "feature_volumes", cfg.dual.feature_volumes);
    }
    if (j.contains("gat")) {
        const auto& g = j.at("gat");
        read_field(g, "gat", "heads", cfg.gat.heads);
        read_field(g, "gat", "hidden_dim", cfg.gat.hidden_dim);
        read_field(g, "gat", "learning_rate", cfg.gat.learning_rate);
        read_field(g, "gat", "weight_decay", cfg.gat.weight_decay);
        read_field(g, "gat", "epochs", cfg.gat.epochs);
        read_field(g, "gat", "threshold", cfg.gat.threshold);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        read_field(e, "eval", "catch_dist_mm", cfg.eval.catch_dist_mm);
        read_field(e, "eval", "sig_dist_mm", cfg.eval.sig_dist_mm);
        read_field(e, "eval", "resample_step_mm", cfg.eval.resample_step_mm);
    }
    if (j.contains("benchmark")) {
        const auto& b = j.at("benchmark");
        read_field(b, "benchmark", "train_scenes", cfg.bench.train_scenes);
        read_field(b, "benchmark", "test_scenes", cfg.bench.test_scenes);
    }
    cfg.validate();
    return cfg;
}

PipelineConfig config_load(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error&) {
        throw MissingInputError("config file not found: " + path.string());
    }
    return config_from_json_text(text);
}

}  // namespace vprune

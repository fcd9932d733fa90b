#pragma once

// JSON run configuration with dotted-key overrides. Relative paths resolve
// against the directory of the config file.

#include "approxslam/controller.hpp"
#include "approxslam/dataset.hpp"
#include "approxslam/experiment.hpp"
#include "approxslam/specs.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace approxslam {

inline constexpr const char* kOutputRootEnv = "APPROXSLAM_OUTPUT_ROOT";

struct RunConfig {
    std::optional<fs::path> suite;    // simulate in memory from a suite spec
    std::optional<fs::path> dataset;  // or read a simulated dataset directory
    std::optional<bool> noise;        // overrides the suite's noise switch
    std::optional<std::uint64_t> seed;
    int frames = 0;                   // 0 = whole sequence
    std::string label;
    RunSettings settings;
    std::optional<fs::path> output_dir;
    nlohmann::json echo;              // the effective configuration, after overrides
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!j.is_object()) throw SpecError(ctx + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw SpecError("unknown key '" + key + "' in " + ctx);
    }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline KnobSettings knobs_from_json(const nlohmann::json& j) {
    check_keys(j, {"csr", "icp", "pd", "tr", "ir"}, "controller.knobs");
    KnobSettings k;
    read_opt(j, "csr", k.csr);
    read_opt(j, "icp", k.icp_threshold);
    if (j.contains("pd")) {
        const auto& pd = j.at("pd");
        if (!pd.is_array() || pd.size() != 3) throw SpecError("controller.knobs.pd must hold three iteration caps");
        for (std::size_t i = 0; i < 3; ++i) k.pd[i] = pd[i].get<int>();
    }
    read_opt(j, "tr", k.tr);
    read_opt(j, "ir", k.ir);
    k.validate();
    return k;
}

inline nlohmann::json to_json(const KnobSettings& k) {
    return {{"csr", k.csr}, {"icp", k.icp_threshold}, {"pd", k.pd}, {"tr", k.tr}, {"ir", k.ir}};
}

inline ControllerConfig controller_from_json(const nlohmann::json& j) {
    check_keys(j,
               {"strategy", "v_ref", "correction_threshold", "rotation_correction_threshold",
                "surface_sigma_threshold", "samples_per_quadrant", "margin_fraction", "bootstrap_frames", "p_levels",
                "min_quadrant_samples", "knobs"},
               "controller");
    ControllerConfig c;
    if (j.contains("strategy")) c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    read_opt(j, "v_ref", c.v_ref);
    read_opt(j, "correction_threshold", c.correction_threshold);
    read_opt(j, "rotation_correction_threshold", c.rotation_correction_threshold);
    read_opt(j, "surface_sigma_threshold", c.surface_sigma_threshold);
    read_opt(j, "samples_per_quadrant", c.samples_per_quadrant);
    read_opt(j, "margin_fraction", c.margin_fraction);
    read_opt(j, "bootstrap_frames", c.bootstrap_frames);
    read_opt(j, "p_levels", c.p_levels);
    read_opt(j, "min_quadrant_samples", c.min_quadrant_samples);
    if (j.contains("knobs")) c.fixed_knobs = knobs_from_json(j.at("knobs"));
    c.validate();
    return c;
}

inline nlohmann::json to_json(const ControllerConfig& c) {
    return {{"strategy", to_string(c.strategy)},
            {"v_ref", c.v_ref},
            {"correction_threshold", c.correction_threshold},
            {"rotation_correction_threshold", c.rotation_correction_threshold},
            {"surface_sigma_threshold", c.surface_sigma_threshold},
            {"samples_per_quadrant", c.samples_per_quadrant},
            {"margin_fraction", c.margin_fraction},
            {"bootstrap_frames", c.bootstrap_frames},
            {"p_levels", c.p_levels},
            {"min_quadrant_samples", c.min_quadrant_samples},
            {"knobs", to_json(c.fixed_knobs)}};
}

inline VolumeConfig volume_from_json(const nlohmann::json& j) {
    check_keys(j, {"vr", "edge", "origin", "mu", "max_weight"}, "volume");
    VolumeConfig v;
    read_opt(j, "vr", v.resolution);
    read_opt(j, "edge", v.edge);
    if (j.contains("origin")) {
        v.origin = vec3_from(j.at("origin"), "volume.origin");
    } else if (j.contains("edge")) {
        // Centered in x and y, starting just behind the camera.
        v.origin = Vec3(-0.5 * v.edge, -0.5 * v.edge, -0.3);
    }
    read_opt(j, "mu", v.mu);
    read_opt(j, "max_weight", v.max_weight);
    v.validate();
    return v;
}

inline nlohmann::json to_json(const VolumeConfig& v) {
    return {{"vr", v.resolution},
            {"edge", v.edge},
            {"origin", {v.origin.x(), v.origin.y(), v.origin.z()}},
            {"mu", v.mu},
            {"max_weight", v.max_weight}};
}

}  // namespace detail

/// Splits "a.b.c=value" and stores the parsed value at that path. The value
/// is read as JSON when it parses, otherwise kept as a string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidInputError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw InvalidInputError("override key '" + key + "' has an empty component");
        if (!node->is_object()) {
            if (!node->is_null()) throw InvalidInputError("override key '" + key + "' descends into a non-object");
            *node = nlohmann::json::object();
        }
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = std::move(value);
}

inline RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
    RunConfig rc;
    try {
        detail::check_keys(j,
                           {"suite", "dataset", "noise", "seed", "frames", "label", "volume", "controller",
                            "precision_mode", "output_dir"},
                           "config");
        auto resolve = [&](const std::string& p) {
            const fs::path path(p);
            return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
        };
        if (j.contains("suite")) rc.suite = resolve(j.at("suite").get<std::string>());
        if (j.contains("dataset")) rc.dataset = resolve(j.at("dataset").get<std::string>());
        if (rc.suite && rc.dataset) throw SpecError("config names both a suite and a dataset");
        if (j.contains("noise")) rc.noise = j.at("noise").get<bool>();
        if (j.contains("seed")) rc.seed = j.at("seed").get<std::uint64_t>();
        detail::read_opt(j, "frames", rc.frames);
        if (rc.frames < 0) throw SpecError("frames must be >= 0");
        detail::read_opt(j, "label", rc.label);
        if (j.contains("volume")) rc.settings.volume = detail::volume_from_json(j.at("volume"));
        if (j.contains("controller")) rc.settings.controller = detail::controller_from_json(j.at("controller"));
        if (j.contains("precision_mode")) {
            rc.settings.precision = precision_from_string(j.at("precision_mode").get<std::string>());
        }
        if (j.contains("output_dir")) rc.output_dir = resolve(j.at("output_dir").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("config: ") + e.what());
    } catch (const InvalidInputError& e) {
        throw SpecError(std::string("config: ") + e.what());
    }
    rc.settings.max_frames = rc.frames;
    if (rc.label.empty()) {
        if (rc.suite) rc.label = rc.suite->stem().string();
        else if (rc.dataset) rc.label = rc.dataset->filename().string();
        else rc.label = "run";
    }
    rc.settings.label = rc.label;

    rc.echo = {{"label", rc.label},
               {"frames", rc.frames},
               {"volume", detail::to_json(rc.settings.volume)},
               {"controller", detail::to_json(rc.settings.controller)},
               {"precision_mode", to_string(rc.settings.precision)}};
    if (rc.suite) rc.echo["suite"] = rc.suite->string();
    if (rc.dataset) rc.echo["dataset"] = rc.dataset->string();
    if (rc.noise) rc.echo["noise"] = *rc.noise;
    if (rc.seed) rc.echo["seed"] = *rc.seed;
    if (rc.output_dir) rc.echo["output_dir"] = rc.output_dir->string();
    rc.settings.config_echo = rc.echo.dump();
    return rc;
}

/// Reads a config file (or starts from an empty object) and applies overrides in order.
inline RunConfig load_run_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides) {
    nlohmann::json j = nlohmann::json::object();
    fs::path base;
    if (path) {
        j = load_json_file(*path);
        base = path->parent_path();
    }
    for (const auto& o : overrides) apply_override(j, o);
    return run_config_from_json(j, base);
}

/// Renders the first `frames` frames of a suite (all when 0) without changing
/// the keyframe timing of the full trajectory.
inline Dataset simulate_prefix(const SuiteSpec& suite, int frames) {
    if (frames <= 0 || frames >= suite.trajectory.frame_count) return simulate(suite);
    Dataset ds;
    ds.intrinsics = suite.camera;
    const auto poses = interpolate_trajectory(suite.trajectory);
    for (int i = 0; i < frames; ++i) {
        const auto k = static_cast<std::size_t>(i);
        DepthFrameRaw f = render_depth(suite.scene, poses[k], suite.camera);
        if (suite.noise_enabled) f = apply_noise(f, suite.noise.for_frame(k));
        ds.frames.push_back(std::move(f));
        ds.ground_truth.push_back(poses[k]);
    }
    return ds;
}

/// The dataset a config refers to: a suite rendered in memory, or a dataset directory.
inline Dataset load_config_dataset(const RunConfig& rc) {
    if (rc.dataset) return read_dataset(*rc.dataset);
    if (!rc.suite) throw SpecError("config names neither a suite nor a dataset");
    SuiteSpec suite = suite_from_json(load_json_file(*rc.suite));
    if (rc.noise) {
        if (*rc.noise && !suite.noise_enabled) suite.noise = NoiseModel{};
        suite.noise_enabled = *rc.noise;
    }
    if (rc.seed) suite.noise.seed = *rc.seed;
    return simulate_prefix(suite, rc.frames);
}

/// Output root: $APPROXSLAM_OUTPUT_ROOT when set, else ./out.
inline fs::path default_output_root() {
    const char* env = std::getenv(kOutputRootEnv);
    return env && *env ? fs::path(env) : fs::path("out");
}

}  // namespace approxslam

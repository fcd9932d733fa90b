#pragma once

// JSON documents describing scenes, trajectories, noise and whole benchmark
// suites. The schema is documented in docs/formats.md.

#include "approxslam/dataset.hpp"
#include "approxslam/errors.hpp"
#include "approxslam/scene.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

namespace approxslam {

using nlohmann::json;

namespace detail {

inline Vec3 vec3_from(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) throw SpecError(std::string(what) + ": expected a 3-element array");
    for (const auto& x : j) {
        if (!x.is_number()) throw SpecError(std::string(what) + ": expected numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline const json& require(const json& j, const char* key, const char* ctx) {
    if (!j.is_object() || !j.contains(key)) throw SpecError(std::string(ctx) + ": missing '" + key + "'");
    return j.at(key);
}

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

inline Scene scene_from_json(const json& j) {
    Scene scene;
    const json& b = detail::require(j, "bounds", "scene");
    scene.bounds.min = detail::vec3_from(detail::require(b, "min", "scene.bounds"), "scene.bounds.min");
    scene.bounds.max = detail::vec3_from(detail::require(b, "max", "scene.bounds"), "scene.bounds.max");
    const json& prims = detail::require(j, "primitives", "scene");
    if (!prims.is_array()) throw SpecError("scene.primitives must be an array");
    for (const auto& p : prims) {
        const std::string type = detail::require(p, "type", "primitive").get<std::string>();
        if (type == "box") {
            scene.primitives.push_back(BoxPrimitive{detail::vec3_from(detail::require(p, "center", "box"), "box.center"),
                                                    detail::vec3_from(detail::require(p, "half_extents", "box"),
                                                                      "box.half_extents")});
        } else if (type == "plane") {
            Vec3 n = detail::vec3_from(detail::require(p, "normal", "plane"), "plane.normal");
            if (!(n.norm() > 0)) throw SpecError("plane.normal must be non-zero");
            scene.primitives.push_back(
                PlanePrimitive{detail::vec3_from(detail::require(p, "point", "plane"), "plane.point"), n.normalized()});
        } else if (type == "sphere") {
            const json& r = detail::require(p, "radius", "sphere");
            if (!r.is_number()) throw SpecError("sphere.radius must be a number");
            scene.primitives.push_back(
                SpherePrimitive{detail::vec3_from(detail::require(p, "center", "sphere"), "sphere.center"), r.get<double>()});
        } else {
            throw SpecError("unknown primitive type '" + type + "'");
        }
    }
    scene.validate();
    return scene;
}

inline json to_json(const Scene& scene) {
    json prims = json::array();
    for (const auto& prim : scene.primitives) {
        if (const auto* b = std::get_if<BoxPrimitive>(&prim)) {
            prims.push_back({{"type", "box"}, {"center", detail::vec3_json(b->center)},
                             {"half_extents", detail::vec3_json(b->half_extents)}});
        } else if (const auto* p = std::get_if<PlanePrimitive>(&prim)) {
            prims.push_back({{"type", "plane"}, {"point", detail::vec3_json(p->point)},
                             {"normal", detail::vec3_json(p->normal)}});
        } else if (const auto* s = std::get_if<SpherePrimitive>(&prim)) {
            prims.push_back({{"type", "sphere"}, {"center", detail::vec3_json(s->center)}, {"radius", s->radius}});
        }
    }
    return {{"bounds", {{"min", detail::vec3_json(scene.bounds.min)}, {"max", detail::vec3_json(scene.bounds.max)}}},
            {"primitives", prims}};
}

/// Keyframe orientation may be given as "quaternion" [x,y,z,w], as
/// "rotation" {"axis": [...], "angle_deg": a}, or as a "look_at" target point.
inline Keyframe keyframe_from_json(const json& j) {
    Keyframe k;
    const Vec3 pos = detail::vec3_from(detail::require(j, "position", "keyframe"), "keyframe.position");
    Mat3 rot = Mat3::Identity();
    if (j.contains("quaternion")) {
        const json& q = j.at("quaternion");
        if (!q.is_array() || q.size() != 4) throw SpecError("keyframe.quaternion: expected [x, y, z, w]");
        Eigen::Quaterniond quat(q[3].get<double>(), q[0].get<double>(), q[1].get<double>(), q[2].get<double>());
        if (!(quat.norm() > 0)) throw SpecError("keyframe.quaternion must be non-zero");
        rot = quat.normalized().toRotationMatrix();
    } else if (j.contains("rotation")) {
        const json& r = j.at("rotation");
        const Vec3 axis = detail::vec3_from(detail::require(r, "axis", "keyframe.rotation"), "rotation.axis");
        if (!(axis.norm() > 0)) throw SpecError("rotation.axis must be non-zero");
        const double deg = detail::require(r, "angle_deg", "keyframe.rotation").get<double>();
        rot = Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, axis.normalized()).toRotationMatrix();
    } else if (j.contains("look_at")) {
        rot = look_at_rotation(pos, detail::vec3_from(j.at("look_at"), "keyframe.look_at"));
    }
    if (j.contains("frame")) k.frame = j.at("frame").get<double>();
    k.pose = Pose(rot, pos);
    return k;
}

inline TrajectorySpec trajectory_from_json(const json& j) {
    TrajectorySpec spec;
    try {
        spec.frame_count = detail::require(j, "frames", "trajectory").get<int>();
        const json& keys = detail::require(j, "keyframes", "trajectory");
        if (!keys.is_array()) throw SpecError("trajectory.keyframes must be an array");
        for (const auto& k : keys) spec.keyframes.push_back(keyframe_from_json(k));
    } catch (const json::exception& e) {
        throw SpecError(std::string("trajectory: ") + e.what());
    }
    spec.validate();
    return spec;
}

inline json to_json(const TrajectorySpec& spec) {
    json keys = json::array();
    for (std::size_t i = 0; i < spec.keyframes.size(); ++i) {
        const auto& k = spec.keyframes[i];
        Eigen::Quaterniond q(k.pose.rotation());
        json kj = {{"position", detail::vec3_json(k.pose.translation())},
                   {"quaternion", json::array({q.x(), q.y(), q.z(), q.w()})}};
        if (k.frame >= 0) kj["frame"] = k.frame;
        keys.push_back(kj);
    }
    return {{"frames", spec.frame_count}, {"keyframes", keys}};
}

inline NoiseModel noise_from_json(const json& j) {
    NoiseModel m;
    try {
        m.sigma0 = j.value("sigma0", m.sigma0);
        m.sigma1 = j.value("sigma1", m.sigma1);
        m.dropout_prob = j.value("dropout", m.dropout_prob);
        m.seed = j.value("seed", m.seed);
    } catch (const json::exception& e) {
        throw SpecError(std::string("noise: ") + e.what());
    }
    m.validate();
    if (m.dropout_prob >= 1.0) throw SpecError("noise.dropout must be below 1");
    return m;
}

inline json to_json(const NoiseModel& m) {
    return {{"sigma0", m.sigma0}, {"sigma1", m.sigma1}, {"dropout", m.dropout_prob}, {"seed", m.seed}};
}

/// A benchmark sequence: scene + camera + ground-truth trajectory + noise.
struct SuiteSpec {
    std::string name = "suite";
    CameraIntrinsics camera;
    Scene scene;
    TrajectorySpec trajectory;
    NoiseModel noise;
    bool noise_enabled = true;
};

inline SuiteSpec suite_from_json(const json& j) {
    SuiteSpec s;
    try {
        s.name = j.value("name", s.name);
        if (j.contains("camera")) s.camera = intrinsics_from_json(j.at("camera"));
        s.scene = scene_from_json(detail::require(j, "scene", "suite"));
        s.trajectory = trajectory_from_json(detail::require(j, "trajectory", "suite"));
        if (j.contains("noise") && !j.at("noise").is_null()) {
            s.noise = noise_from_json(j.at("noise"));
        } else {
            s.noise_enabled = false;
            s.noise = NoiseModel::none();
        }
    } catch (const json::exception& e) {
        throw SpecError(std::string("suite: ") + e.what());
    }
    for (const auto& k : s.trajectory.keyframes) {
        if (!s.scene.bounds.contains(k.pose.translation())) throw SpecError("keyframe lies outside the scene bounds");
    }
    return s;
}

inline json to_json(const SuiteSpec& s) {
    json j = {{"name", s.name}, {"camera", to_json(s.camera)}, {"scene", to_json(s.scene)},
              {"trajectory", to_json(s.trajectory)}};
    j["noise"] = s.noise_enabled ? to_json(s.noise) : json(nullptr);
    return j;
}

inline json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SpecError(path.string() + ": " + e.what());
    }
}

/// Renders every frame of a suite. Frame i uses NoiseModel::for_frame(i).
inline Dataset simulate(const SuiteSpec& suite) {
    Dataset ds;
    ds.intrinsics = suite.camera;
    ds.ground_truth = interpolate_trajectory(suite.trajectory);
    ds.frames.reserve(ds.ground_truth.size());
    for (std::size_t i = 0; i < ds.ground_truth.size(); ++i) {
        DepthFrameRaw f = render_depth(suite.scene, ds.ground_truth[i], suite.camera);
        if (suite.noise_enabled) f = apply_noise(f, suite.noise.for_frame(i));
        ds.frames.push_back(std::move(f));
    }
    return ds;
}

}  // namespace approxslam

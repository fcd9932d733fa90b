#pragma once

// Synthetic ground truth: analytic scenes, a sphere-traced depth camera,
// a parametric depth-noise model and keyframe trajectory interpolation.

#include "approxslam/camera.hpp"
#include "approxslam/errors.hpp"
#include "approxslam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <variant>
#include <vector>

namespace approxslam {

struct BoxPrimitive {
    Vec3 center = Vec3::Zero();
    Vec3 half_extents = Vec3::Ones();
};

/// Half-space; solid lies on the side opposite the normal.
struct PlanePrimitive {
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
};

struct SpherePrimitive {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

using Primitive = std::variant<BoxPrimitive, PlanePrimitive, SpherePrimitive>;

struct AxisBox {
    Vec3 min = Vec3::Constant(-1.0);
    Vec3 max = Vec3::Constant(1.0);

    bool contains(const Vec3& p, double slack = 0.0) const {
        return (p.array() >= min.array() - slack).all() && (p.array() <= max.array() + slack).all();
    }
};

struct Scene {
    std::vector<Primitive> primitives;
    AxisBox bounds;

    void validate() const {
        if (primitives.empty()) throw SpecError("scene needs at least one primitive");
        if ((bounds.max.array() <= bounds.min.array()).any()) throw SpecError("scene bounds are empty");
        for (const auto& prim : primitives) {
            if (const auto* b = std::get_if<BoxPrimitive>(&prim)) {
                if ((b->half_extents.array() <= 0).any()) throw SpecError("box half extents must be positive");
                if (!bounds.contains(b->center - b->half_extents, 1e-9) ||
                    !bounds.contains(b->center + b->half_extents, 1e-9)) {
                    throw SpecError("box lies outside the scene bounds");
                }
            } else if (const auto* s = std::get_if<SpherePrimitive>(&prim)) {
                if (!(s->radius > 0)) throw SpecError("sphere radius must be positive");
                if (!bounds.contains(s->center - Vec3::Constant(s->radius), 1e-9) ||
                    !bounds.contains(s->center + Vec3::Constant(s->radius), 1e-9)) {
                    throw SpecError("sphere lies outside the scene bounds");
                }
            } else if (const auto* p = std::get_if<PlanePrimitive>(&prim)) {
                if (std::abs(p->normal.norm() - 1.0) > 1e-6) throw SpecError("plane normal must be unit length");
                if (!bounds.contains(p->point, 1e-9)) throw SpecError("plane anchor lies outside the scene bounds");
            }
        }
    }
};

inline double sdf_eval(const BoxPrimitive& b, const Vec3& p) {
    const Vec3 q = (p - b.center).cwiseAbs() - b.half_extents;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

inline double sdf_eval(const PlanePrimitive& pl, const Vec3& p) { return pl.normal.dot(p - pl.point); }

inline double sdf_eval(const SpherePrimitive& s, const Vec3& p) { return (p - s.center).norm() - s.radius; }

/// Signed distance in meters: negative inside matter.
inline double sdf_eval(const Scene& scene, const Vec3& p) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& prim : scene.primitives) {
        d = std::min(d, std::visit([&](const auto& x) { return sdf_eval(x, p); }, prim));
    }
    return d;
}

struct SphereTraceParams {
    double hit_epsilon = 1e-4;
    int max_steps = 128;
    double max_range = 8.0;
};

/// Renders a millimeter z-depth image by sphere tracing every pixel ray.
inline DepthFrameRaw render_depth(const Scene& scene, const Pose& pose, const CameraIntrinsics& intr,
                                  const SphereTraceParams& params = {}) {
    intr.validate();
    const Vec3 origin = pose.translation();
    if (!(sdf_eval(scene, origin) > 0.0)) {
        throw InvalidInputError("camera center is inside scene geometry");
    }
    DepthFrameRaw out(intr.width, intr.height, 0);
    for (int v = 0; v < intr.height; ++v) {
        for (int u = 0; u < intr.width; ++u) {
            const Vec3 ray_cam = intr.ray(u, v);
            const double ray_len = ray_cam.norm();
            const Vec3 dir = pose.rotation() * (ray_cam / ray_len);
            double s = 0.0;
            bool hit = false;
            for (int step = 0; step < params.max_steps; ++step) {
                const Vec3 p = origin + s * dir;
                if (!scene.bounds.contains(p, 1e-3)) break;
                const double d = sdf_eval(scene, p);
                if (d < params.hit_epsilon) {
                    hit = true;
                    break;
                }
                s += d;
                if (s > params.max_range) break;
            }
            if (!hit) continue;
            const double z_mm = std::round(s / ray_len * 1000.0);
            if (z_mm >= 1.0) out.at(u, v) = static_cast<std::uint16_t>(std::min(z_mm, 65535.0));
        }
    }
    return out;
}

/// Depth noise: sigma(z) = sigma0 + sigma1 * z^2 (meters), plus per-pixel dropout.
struct NoiseModel {
    double sigma0 = 0.002;
    double sigma1 = 0.002;
    double dropout_prob = 0.005;
    std::uint64_t seed = 1;

    static NoiseModel none() { return {0.0, 0.0, 0.0, 0}; }

    void validate() const {
        if (sigma0 < 0 || sigma1 < 0) throw SpecError("noise sigmas must be non-negative");
        if (dropout_prob < 0 || dropout_prob > 1) throw SpecError("dropout probability must lie in [0, 1]");
    }

    /// Model used for frame `index` of a sequence: same parameters, decorrelated seed.
    NoiseModel for_frame(std::uint64_t index) const {
        NoiseModel m = *this;
        m.seed = seed * 0x9E3779B97F4A7C15ull + index * 0xBF58476D1CE4E5B9ull + 1;
        return m;
    }
};

inline DepthFrameRaw apply_noise(const DepthFrameRaw& frame, const NoiseModel& model) {
    model.validate();
    DepthFrameRaw out = frame;
    std::mt19937_64 rng(model.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& px : out.data) {
        if (px == 0) continue;
        if (model.dropout_prob > 0.0 && uniform(rng) < model.dropout_prob) {
            px = 0;
            continue;
        }
        const double z = px * 1e-3;
        const double sigma = model.sigma0 + model.sigma1 * z * z;
        if (sigma == 0.0) continue;
        const double noisy_mm = std::round((z + sigma * gauss(rng)) * 1000.0);
        px = static_cast<std::uint16_t>(std::clamp(noisy_mm, 1.0, 65535.0));
    }
    return out;
}

struct Keyframe {
    /// Frame index the keyframe is pinned to; negative means evenly spaced.
    double frame = -1.0;
    Pose pose;
};

struct TrajectorySpec {
    std::vector<Keyframe> keyframes;
    int frame_count = 2;

    void validate() const {
        if (frame_count < 2) throw SpecError("trajectory needs at least two frames");
        if (keyframes.empty()) throw SpecError("trajectory needs at least one keyframe");
        double last = -1.0;
        for (std::size_t k = 0; k < keyframes.size(); ++k) {
            const double f = keyframe_frame(k);
            if (f < last) throw SpecError("keyframe frames must be non-decreasing");
            last = f;
        }
    }

    double keyframe_frame(std::size_t k) const {
        if (keyframes[k].frame >= 0.0) return keyframes[k].frame;
        if (keyframes.size() == 1) return 0.0;
        return static_cast<double>(k) * (frame_count - 1) / static_cast<double>(keyframes.size() - 1);
    }
};

/// Ground-truth poses: piecewise-linear positions, slerped rotations.
inline std::vector<Pose> interpolate_trajectory(const TrajectorySpec& spec) {
    spec.validate();
    const auto& keys = spec.keyframes;
    std::vector<Pose> out;
    out.reserve(static_cast<std::size_t>(spec.frame_count));
    std::size_t seg = 0;
    for (int f = 0; f < spec.frame_count; ++f) {
        const double t = f;
        while (seg + 1 < keys.size() && spec.keyframe_frame(seg + 1) <= t) ++seg;
        if (seg + 1 >= keys.size() || t <= spec.keyframe_frame(seg)) {
            out.push_back(keys[seg].pose);
            continue;
        }
        const double f0 = spec.keyframe_frame(seg);
        const double f1 = spec.keyframe_frame(seg + 1);
        const double alpha = (t - f0) / (f1 - f0);
        const Pose& a = keys[seg].pose;
        const Pose& b = keys[seg + 1].pose;
        const Eigen::Quaterniond qa(a.rotation());
        const Eigen::Quaterniond qb(b.rotation());
        const Vec3 pos = (1.0 - alpha) * a.translation() + alpha * b.translation();
        out.emplace_back(qa.slerp(alpha, qb).normalized().toRotationMatrix(), pos);
    }
    out.back() = keys.back().pose;
    return out;
}

/// Camera-to-world rotation looking from `eye` toward `target`; image y points along world +y.
inline Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& down = Vec3::UnitY()) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = down.cross(z);
    if (x.norm() < 1e-9) throw SpecError("look-at direction is parallel to the down vector");
    x.normalize();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return r;
}

}  // namespace approxslam

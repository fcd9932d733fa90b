#pragma once

// Coarse-to-fine point-to-plane ICP with projective data association.
//
// Each iteration linearizes the residual n_ref . (T v_cur - v_ref) around the
// current estimate T, solves the 6x6 normal equations for a twist x and
// left-applies it: T <- exp(x) * T. The 6x6 system is accumulated in a fixed
// pixel order so results are reproducible.

#include "approxslam/camera.hpp"
#include "approxslam/geometry.hpp"
#include "approxslam/knobs.hpp"
#include "approxslam/pyramid.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace approxslam {

struct IcpParams {
    double max_distance = 0.1;         // meters
    double max_normal_angle_deg = 30.0;
    double min_inlier = 0.5;           // tracked requires inlier fraction >= this
    double max_rms = 0.02;             // and rms residual <= this (meters)
    double degeneracy_ratio = 1e-6;    // min/max eigenvalue ratio below which the system is singular
};

struct TrackResult {
    Pose pose;
    double rms_residual = 0.0;
    std::array<int, kPyramidLevels> iterations_used = {0, 0, 0};
    double inlier_fraction = 0.0;
    bool tracked = false;
    bool degenerate = false;
    /// RMS residual at every accepted linearization point, per level.
    std::array<std::vector<double>, kPyramidLevels> residual_trace;
};

namespace detail {

struct WorldMap {
    CameraIntrinsics intrinsics;
    std::vector<Eigen::Vector3d> vertices;
    std::vector<Eigen::Vector3d> normals;
    const std::vector<std::uint8_t>* valid;
    int width;
    int height;
};

inline WorldMap to_world(const PyramidLevel& level, const Pose& pose) {
    WorldMap w{level.intrinsics, {}, {}, &level.map.valid, level.map.width, level.map.height};
    w.vertices.resize(level.map.size());
    w.normals.resize(level.map.size());
    for (std::size_t i = 0; i < level.map.size(); ++i) {
        if (!level.map.valid[i]) continue;
        w.vertices[i] = pose.apply(level.map.vertices[i].cast<double>());
        w.normals[i] = pose.rotation() * level.map.normals[i].cast<double>();
    }
    return w;
}

struct NormalEquations {
    Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
    double sse = 0.0;
    std::size_t count = 0;
    std::size_t candidates = 0;

    double rms() const { return count ? std::sqrt(sse / static_cast<double>(count)) : 0.0; }
};

inline NormalEquations accumulate(const VertexNormalMap& cur, const WorldMap& ref, const Pose& estimate,
                                  const Pose& ref_pose, const IcpParams& params) {
    NormalEquations eq;
    const Transform world_to_ref = inverse(ref_pose);
    const double cos_max = std::cos(params.max_normal_angle_deg * std::numbers::pi / 180.0);
    const double max_d2 = params.max_distance * params.max_distance;
    const Mat3& r = estimate.rotation();
    const Vec3& t = estimate.translation();
    const Mat3& rr = world_to_ref.rotation();
    const Vec3& rt = world_to_ref.translation();
    const CameraIntrinsics& ri = ref.intrinsics;
    Eigen::Matrix<double, 6, 1> j;

    for (std::size_t i = 0; i < cur.size(); ++i) {
        if (!cur.valid[i]) continue;
        ++eq.candidates;
        const Vec3 p = r * cur.vertices[i].cast<double>() + t;
        const Vec3 q = rr * p + rt;
        if (q.z() <= 0.0) continue;
        const int u = static_cast<int>(std::lround(ri.fx * q.x() / q.z() + ri.cx));
        const int v = static_cast<int>(std::lround(ri.fy * q.y() / q.z() + ri.cy));
        if (u < 0 || v < 0 || u >= ref.width || v >= ref.height) continue;
        const std::size_t k = static_cast<std::size_t>(v) * ref.width + u;
        if (!(*ref.valid)[k]) continue;
        const Vec3& rv = ref.vertices[k];
        const Vec3& rn = ref.normals[k];
        const Vec3 diff = p - rv;
        if (diff.squaredNorm() > max_d2) continue;
        const Vec3 n = r * cur.normals[i].cast<double>();
        if (n.dot(rn) < cos_max) continue;
        const double e = rn.dot(diff);
        j.head<3>() = rn;
        j.tail<3>() = p.cross(rn);
        eq.a.noalias() += j * j.transpose();
        eq.b.noalias() += j * e;
        eq.sse += e * e;
        ++eq.count;
    }
    return eq;
}

/// Returns false when the system is (numerically) singular.
inline bool solve_twist(const NormalEquations& eq, const IcpParams& params, Twist& out) {
    if (eq.count < 6) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(eq.a);
    if (es.info() != Eigen::Success) return false;
    const auto& ev = es.eigenvalues();
    if (!(ev(5) > 0.0) || ev(0) < params.degeneracy_ratio * ev(5)) return false;
    const Eigen::Matrix<double, 6, 1> x = es.eigenvectors() *
                                          (es.eigenvalues().cwiseInverse().asDiagonal() *
                                           (es.eigenvectors().transpose() * (-eq.b)));
    if (!x.allFinite()) return false;
    out.linear = x.head<3>();
    out.angular = x.tail<3>();
    return true;
}

}  // namespace detail

/// Aligns the current frame pyramid to the reference maps rendered from `ref_pose`.
/// On a singular system at the finest level the result is untracked and keeps `init`.
inline TrackResult icp_track(const Pyramid& cur, const Pyramid& ref, const Pose& ref_pose, const Pose& init,
                             const KnobSettings& knobs, const IcpParams& params = {}) {
    TrackResult result;
    result.pose = init;
    Pose estimate = init;
    detail::NormalEquations last;
    const int levels = static_cast<int>(std::min(cur.size(), ref.size()));

    for (int level = levels - 1; level >= 0; --level) {
        const detail::WorldMap ref_world = detail::to_world(ref[level], ref_pose);
        const int max_iter = knobs.pd[static_cast<std::size_t>(level)];
        auto& trace = result.residual_trace[static_cast<std::size_t>(level)];
        Pose accepted = estimate;
        for (int it = 0; it < max_iter; ++it) {
            detail::NormalEquations eq = detail::accumulate(cur[level].map, ref_world, estimate, ref_pose, params);
            ++result.iterations_used[static_cast<std::size_t>(level)];
            const double rms = eq.rms();
            if (!trace.empty() && (eq.count < 6 || rms > trace.back())) {
                // The last step made things worse; keep the previous estimate.
                estimate = accepted;
                break;
            }
            trace.push_back(rms);
            accepted = estimate;
            if (level == 0) last = eq;
            Twist step;
            if (!detail::solve_twist(eq, params, step)) {
                if (level == 0 && it == 0) {
                    result.degenerate = true;
                    result.rms_residual = rms;
                    result.inlier_fraction =
                        eq.candidates ? static_cast<double>(eq.count) / static_cast<double>(eq.candidates) : 0.0;
                    return result;
                }
                break;
            }
            estimate = compose(estimate, twist_exp(step)).orthonormalized();
            if (step.squared_norm() < knobs.icp_threshold) break;
        }
    }

    result.pose = estimate;
    result.rms_residual = last.rms();
    result.inlier_fraction =
        last.candidates ? static_cast<double>(last.count) / static_cast<double>(last.candidates) : 0.0;
    result.tracked = result.inlier_fraction >= params.min_inlier && result.rms_residual <= params.max_rms;
    return result;
}

}  // namespace approxslam

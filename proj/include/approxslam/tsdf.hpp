#pragma once

// Truncated signed distance volume with projective integration.

#include "approxslam/camera.hpp"
#include "approxslam/errors.hpp"
#include "approxslam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace approxslam {

struct VolumeConfig {
    int resolution = 64;                     // voxels per axis
    double edge = 5.0;                       // meters
    Vec3 origin = Vec3(-2.5, -2.5, -1.0);    // world position of the volume's min corner
    double mu = 0.1;                         // truncation distance, meters
    float max_weight = 100.0f;

    double voxel_size() const { return edge / resolution; }

    void validate() const {
        if (resolution < 8) throw InvalidInputError("volume resolution must be >= 8");
        if (!(edge > 0.0)) throw InvalidInputError("volume edge must be positive");
        if (!(mu > 0.0)) throw InvalidInputError("truncation distance must be positive");
        if (!(max_weight > 0.0f)) throw InvalidInputError("max weight must be positive");
    }
};

class TsdfVolume {
public:
    explicit TsdfVolume(const VolumeConfig& config = {}) : config_(config) {
        config_.validate();
        inv_voxel_ = 1.0 / config_.voxel_size();
        const auto n = static_cast<std::size_t>(config_.resolution) * config_.resolution * config_.resolution;
        tsdf_.assign(n, 1.0f);
        weight_.assign(n, 0.0f);
    }

    const VolumeConfig& config() const { return config_; }
    int resolution() const { return config_.resolution; }
    double voxel_size() const { return config_.voxel_size(); }

    std::size_t index(int x, int y, int z) const {
        const auto r = static_cast<std::size_t>(config_.resolution);
        return (static_cast<std::size_t>(z) * r + y) * r + x;
    }

    Vec3 voxel_center(int x, int y, int z) const {
        return config_.origin + (Vec3(x, y, z) + Vec3::Constant(0.5)) * voxel_size();
    }

    float tsdf(int x, int y, int z) const { return tsdf_[index(x, y, z)]; }
    float weight(int x, int y, int z) const { return weight_[index(x, y, z)]; }
    const std::vector<float>& tsdf_data() const { return tsdf_; }
    const std::vector<float>& weight_data() const { return weight_; }
    std::vector<float>& tsdf_data() { return tsdf_; }
    std::vector<float>& weight_data() { return weight_; }

    /// Trilinear sample at a world point; false when outside the lattice of voxel centers.
    bool sample(const Vec3& p, float& out) const {
        const double gx = (p.x() - config_.origin.x()) * inv_voxel_ - 0.5;
        const double gy = (p.y() - config_.origin.y()) * inv_voxel_ - 0.5;
        const double gz = (p.z() - config_.origin.z()) * inv_voxel_ - 0.5;
        if (!(gx >= 0.0 && gy >= 0.0 && gz >= 0.0)) return false;
        // Non-negative, so truncation is floor.
        const int x0 = static_cast<int>(gx);
        const int y0 = static_cast<int>(gy);
        const int z0 = static_cast<int>(gz);
        const int last = config_.resolution - 1;
        if (x0 >= last || y0 >= last || z0 >= last) return false;
        const float fx = static_cast<float>(gx - x0);
        const float fy = static_cast<float>(gy - y0);
        const float fz = static_cast<float>(gz - z0);
        const std::size_t r = static_cast<std::size_t>(config_.resolution);
        const std::size_t i000 = index(x0, y0, z0);
        const std::size_t i010 = i000 + r;
        const std::size_t i001 = i000 + r * r;
        const std::size_t i011 = i001 + r;
        const float c00 = tsdf_[i000] + (tsdf_[i000 + 1] - tsdf_[i000]) * fx;
        const float c10 = tsdf_[i010] + (tsdf_[i010 + 1] - tsdf_[i010]) * fx;
        const float c01 = tsdf_[i001] + (tsdf_[i001 + 1] - tsdf_[i001]) * fx;
        const float c11 = tsdf_[i011] + (tsdf_[i011 + 1] - tsdf_[i011]) * fx;
        const float c0 = c00 + (c10 - c00) * fy;
        const float c1 = c01 + (c11 - c01) * fy;
        out = c0 + (c1 - c0) * fz;
        return true;
    }

    /// Like sample(), but also false when any of the eight corners has never been observed.
    bool sample_observed(const Vec3& p, float& out) const {
        if (!sample(p, out)) return false;
        const auto g = [&](int a) {
            return static_cast<int>((p[a] - config_.origin[a]) * inv_voxel_ - 0.5);
        };
        const std::size_t r = static_cast<std::size_t>(config_.resolution);
        const std::size_t i000 = index(g(0), g(1), g(2));
        for (std::size_t dz : {std::size_t{0}, r * r}) {
            for (std::size_t dy : {std::size_t{0}, r}) {
                if (weight_[i000 + dz + dy] == 0.0f || weight_[i000 + dz + dy + 1] == 0.0f) return false;
            }
        }
        return true;
    }

private:
    VolumeConfig config_;
    double inv_voxel_ = 1.0;
    std::vector<float> tsdf_;
    std::vector<float> weight_;
};

/// Projective TSDF update: sdf = measured depth - voxel camera depth, skipped
/// when sdf < -mu, merged as a weighted running average with unit weight.
inline void tsdf_integrate(TsdfVolume& vol, const DepthFrame& frame, const Pose& pose, const CameraIntrinsics& intr) {
    check_frame_matches(frame.width, frame.height, intr);
    const auto& cfg = vol.config();
    const Transform world_to_cam = inverse(pose);
    const Mat3& r = world_to_cam.rotation();
    const double vs = vol.voxel_size();
    const double mu = cfg.mu;
    const float wmax = cfg.max_weight;
    auto& tsdf = vol.tsdf_data();
    auto& weight = vol.weight_data();
    const int n = cfg.resolution;
    const Vec3 step_x = r.col(0) * vs;

    for (int z = 0; z < n; ++z) {
        for (int y = 0; y < n; ++y) {
            Vec3 pc = world_to_cam.apply(vol.voxel_center(0, y, z));
            std::size_t idx = vol.index(0, y, z);
            for (int x = 0; x < n; ++x, ++idx, pc += step_x) {
                if (pc.z() <= 0.0) continue;
                const double inv_z = 1.0 / pc.z();
                const long u = std::lround(intr.fx * pc.x() * inv_z + intr.cx);
                const long v = std::lround(intr.fy * pc.y() * inv_z + intr.cy);
                if (u < 0 || v < 0 || u >= frame.width || v >= frame.height) continue;
                const float d = frame.at(static_cast<int>(u), static_cast<int>(v));
                if (d <= 0.0f) continue;
                const double sdf = d - pc.z();
                if (sdf < -mu) continue;
                const float value = static_cast<float>(std::clamp(sdf / mu, -1.0, 1.0));
                const float w = weight[idx];
                tsdf[idx] = (tsdf[idx] * w + value) / (w + 1.0f);
                weight[idx] = std::min(w + 1.0f, wmax);
            }
        }
    }
}

}  // namespace approxslam

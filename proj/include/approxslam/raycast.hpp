#pragma once

// Renders vertex/normal maps and a synthetic depth frame from the TSDF by
// marching each pixel ray until the sampled TSDF changes sign from + to -.

#include "approxslam/camera.hpp"
#include "approxslam/geometry.hpp"
#include "approxslam/tsdf.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace approxslam {

struct RaycastParams {
    double near = 0.1;           // meters along the ray
    double far = 8.0;
    double step_fraction = 0.5;  // fine step, in voxels
};

struct RaycastResult {
    VertexNormalMap maps;  // camera frame
    DepthFrame depth;      // camera z, meters; 0 = no surface
};

namespace detail {

/// Ray/box slab test; returns false when the ray misses.
inline bool clip_ray(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi, double& t0, double& t1) {
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-12) {
            if (o[a] < lo[a] || o[a] > hi[a]) return false;
            continue;
        }
        double ta = (lo[a] - o[a]) / d[a];
        double tb = (hi[a] - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

inline bool tsdf_gradient(const TsdfVolume& vol, const Vec3& p, Vec3& grad) {
    const double h = vol.voxel_size();
    float f0;
    if (!vol.sample(p, f0)) return false;
    // Central difference where both sides were observed, one-sided otherwise;
    // never-seen space reads +1 and would bend the normal.
    for (int axis = 0; axis < 3; ++axis) {
        Vec3 off = Vec3::Zero();
        off[axis] = h;
        float a, b;
        const bool fwd = vol.sample_observed(p + off, a);
        const bool bwd = vol.sample_observed(p - off, b);
        if (fwd && bwd) {
            grad[axis] = (static_cast<double>(a) - b) / (2.0 * h);
        } else if (fwd) {
            grad[axis] = (static_cast<double>(a) - f0) / h;
        } else if (bwd) {
            grad[axis] = (static_cast<double>(f0) - b) / h;
        } else {
            return false;
        }
    }
    return true;
}

/// Coarse grid over the lattice of voxel centers. A brick is free when every
/// voxel its trilinear samples can touch stores exactly +1, so any sample
/// inside it reads +1.
class FreeBricks {
public:
    static constexpr int kBrick = 4;  // lattice cells per brick edge

    explicit FreeBricks(const TsdfVolume& vol)
        : cells_(vol.resolution() - 1), bricks_((cells_ + kBrick - 1) / kBrick) {
        const double vs = vol.voxel_size();
        lattice_origin_ = vol.config().origin + Vec3::Constant(0.5 * vs);
        brick_size_ = kBrick * vs;
        free_.assign(static_cast<std::size_t>(bricks_) * bricks_ * bricks_, 1);
        const auto& tsdf = vol.tsdf_data();
        const int n = vol.resolution();
        for (int z = 0; z < n; ++z) {
            for (int y = 0; y < n; ++y) {
                for (int x = 0; x < n; ++x) {
                    if (tsdf[vol.index(x, y, z)] == 1.0f) continue;
                    // Voxel (x, y, z) is a corner of lattice cells x-1 and x along each axis.
                    for (int cz = std::max(z - 1, 0); cz <= std::min(z, cells_ - 1); ++cz) {
                        for (int cy = std::max(y - 1, 0); cy <= std::min(y, cells_ - 1); ++cy) {
                            for (int cx = std::max(x - 1, 0); cx <= std::min(x, cells_ - 1); ++cx) {
                                free_[brick_index(cx / kBrick, cy / kBrick, cz / kBrick)] = 0;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Ray parameter where the ray leaves the free brick containing the point
    /// at `t`, or `t` itself when that brick is not free.
    double skip(const Vec3& origin, const Vec3& dir, double t) const {
        const Vec3 p = origin + t * dir;
        int b[3];
        for (int a = 0; a < 3; ++a) {
            b[a] = static_cast<int>(std::floor((p[a] - lattice_origin_[a]) / brick_size_));
            if (b[a] < 0 || b[a] >= bricks_) return t;
        }
        if (!free_[brick_index(b[0], b[1], b[2])]) return t;
        double exit = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            if (std::abs(dir[a]) < 1e-12) continue;
            const double face = lattice_origin_[a] + (dir[a] > 0.0 ? b[a] + 1 : b[a]) * brick_size_;
            exit = std::min(exit, (face - origin[a]) / dir[a]);
        }
        return std::max(exit, t);
    }

private:
    std::size_t brick_index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * bricks_ + y) * bricks_ + x;
    }

    int cells_;
    int bricks_;
    Vec3 lattice_origin_;
    double brick_size_ = 0.0;
    std::vector<std::uint8_t> free_;
};

}  // namespace detail

inline RaycastResult raycast(const TsdfVolume& vol, const Pose& pose, const CameraIntrinsics& intr,
                             const RaycastParams& params = {}) {
    intr.validate();
    RaycastResult out{VertexNormalMap(intr.width, intr.height), DepthFrame(intr.width, intr.height, 0.0f)};
    const auto& cfg = vol.config();
    const double vs = vol.voxel_size();
    const Vec3 lo = cfg.origin + Vec3::Constant(0.5 * vs);
    const Vec3 hi = cfg.origin + Vec3::Constant(cfg.edge - 0.5 * vs);
    const double fine = params.step_fraction * vs;
    const detail::FreeBricks bricks(vol);
    const Vec3 origin = pose.translation();
    const Transform world_to_cam = inverse(pose);

    for (int v = 0; v < intr.height; ++v) {
        for (int u = 0; u < intr.width; ++u) {
            const Vec3 ray_cam = intr.ray(u, v);
            const Vec3 dir = pose.rotation() * ray_cam.normalized();
            double t0 = params.near;
            double t1 = params.far;
            if (!detail::clip_ray(origin, dir, lo, hi, t0, t1)) continue;

            float f_prev;
            double t = t0;
            if (!vol.sample(origin + t * dir, f_prev)) continue;
            bool found = false;
            double t_hit = 0.0;
            while (t < t1) {
                if (f_prev >= 1.0f) {
                    const double jump = bricks.skip(origin, dir, t);
                    if (jump > t) {
                        t = std::min(jump, t1);
                        if (!vol.sample(origin + t * dir, f_prev)) break;
                        continue;
                    }
                }
                const double t_next = std::min(t + fine, t1);
                if (t_next <= t) break;
                float f;
                if (!vol.sample(origin + t_next * dir, f)) break;
                if (f_prev > 0.0f && f < 0.0f) {
                    t_hit = t + (t_next - t) * f_prev / (f_prev - f);
                    found = true;
                    break;
                }
                t = t_next;
                f_prev = f;
            }
            if (!found) continue;

            const Vec3 p = origin + t_hit * dir;
            Vec3 grad;
            if (!detail::tsdf_gradient(vol, p, grad)) continue;
            const double glen = grad.norm();
            if (!(glen > 0.0)) continue;
            const Vec3 pc = world_to_cam.apply(p);
            const Vec3 nc = world_to_cam.rotation() * (grad / glen);
            if (pc.z() <= 0.0) continue;
            const std::size_t i = out.maps.index(u, v);
            out.maps.vertices[i] = pc.cast<float>();
            out.maps.normals[i] = nc.cast<float>().normalized();
            out.maps.valid[i] = 1;
            out.depth.at(u, v) = static_cast<float>(pc.z());
        }
    }
    return out;
}

}  // namespace approxslam

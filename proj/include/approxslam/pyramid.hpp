#pragma once

// Three-level vertex/normal pyramids. Level 0 is the input resolution; each
// coarser level halves the size (odd trailing rows/columns are dropped).

#include "approxslam/camera.hpp"

#include <Eigen/Core>

#include <vector>

namespace approxslam {

struct PyramidLevel {
    CameraIntrinsics intrinsics;
    VertexNormalMap map;
};

using Pyramid = std::vector<PyramidLevel>;

inline constexpr int kPyramidLevels = 3;

/// 2x2 block average over valid pixels; a block with no valid pixel is invalid.
inline DepthFrame downsample_average(const DepthFrame& in) {
    DepthFrame out(in.width / 2, in.height / 2, 0.0f);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            float sum = 0.0f;
            int n = 0;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const float d = in.at(2 * x + dx, 2 * y + dy);
                    if (d > 0.0f) {
                        sum += d;
                        ++n;
                    }
                }
            }
            if (n > 0) out.at(x, y) = sum / n;
        }
    }
    return out;
}

/// Back-projects every valid pixel; normals from the cross product of forward
/// differences, oriented toward the camera.
inline VertexNormalMap compute_vertex_normals(const DepthFrame& depth, const CameraIntrinsics& intr) {
    VertexNormalMap m(depth.width, depth.height);
    std::vector<std::uint8_t> has_vertex(m.size(), 0);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const float d = depth.at(x, y);
            if (d <= 0.0f) continue;
            const std::size_t i = m.index(x, y);
            m.vertices[i] = intr.back_project(x, y, d).cast<float>();
            has_vertex[i] = 1;
        }
    }
    for (int y = 0; y + 1 < depth.height; ++y) {
        for (int x = 0; x + 1 < depth.width; ++x) {
            const std::size_t i = m.index(x, y);
            const std::size_t right = m.index(x + 1, y);
            const std::size_t down = m.index(x, y + 1);
            if (!has_vertex[i] || !has_vertex[right] || !has_vertex[down]) continue;
            Eigen::Vector3f n = (m.vertices[right] - m.vertices[i]).cross(m.vertices[down] - m.vertices[i]);
            const float len = n.norm();
            if (!(len > 0.0f)) continue;
            n /= len;
            if (n.dot(m.vertices[i]) > 0.0f) n = -n;
            m.normals[i] = n;
            m.valid[i] = 1;
        }
    }
    return m;
}

inline Pyramid build_pyramid(const DepthFrame& frame, const CameraIntrinsics& intr, int levels = kPyramidLevels) {
    check_frame_matches(frame.width, frame.height, intr);
    Pyramid pyr;
    pyr.reserve(static_cast<std::size_t>(levels));
    DepthFrame current = frame;
    CameraIntrinsics level_intr = intr;
    for (int l = 0; l < levels; ++l) {
        if (l > 0) {
            current = downsample_average(current);
            level_intr = intr.block_averaged(1 << l);
        }
        pyr.push_back({level_intr, compute_vertex_normals(current, level_intr)});
    }
    return pyr;
}

/// Halves a vertex/normal map: valid vertices averaged, normals averaged and renormalized.
inline VertexNormalMap downsample_map(const VertexNormalMap& in) {
    VertexNormalMap out(in.width / 2, in.height / 2);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            Eigen::Vector3f v = Eigen::Vector3f::Zero();
            Eigen::Vector3f n = Eigen::Vector3f::Zero();
            int count = 0;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const std::size_t i = in.index(2 * x + dx, 2 * y + dy);
                    if (!in.valid[i]) continue;
                    v += in.vertices[i];
                    n += in.normals[i];
                    ++count;
                }
            }
            if (count == 0) continue;
            const float len = n.norm();
            if (!(len > 1e-6f)) continue;
            const std::size_t o = out.index(x, y);
            out.vertices[o] = v / static_cast<float>(count);
            out.normals[o] = n / len;
            out.valid[o] = 1;
        }
    }
    return out;
}

/// Pyramid over a raycast map (the tracking reference).
inline Pyramid build_map_pyramid(const VertexNormalMap& map, const CameraIntrinsics& intr,
                                 int levels = kPyramidLevels) {
    Pyramid pyr;
    pyr.reserve(static_cast<std::size_t>(levels));
    pyr.push_back({intr, map});
    for (int l = 1; l < levels; ++l) pyr.push_back({intr.block_averaged(1 << l), downsample_map(pyr.back().map)});
    return pyr;
}

}  // namespace approxslam

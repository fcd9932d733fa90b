#pragma once

// Pinhole camera model and per-pixel frame containers.

#include "approxslam/errors.hpp"
#include "approxslam/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace approxslam {

struct CameraIntrinsics {
    double fx = 277.0;
    double fy = 277.0;
    double cx = 159.5;
    double cy = 119.5;
    int width = 320;
    int height = 240;

    static CameraIntrinsics desk_default() { return {}; }

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0) || width <= 0 || height <= 0) {
            throw InvalidInputError("camera intrinsics must have positive focal lengths and size");
        }
    }

    /// Intrinsics for a frame subsampled by `k` (pixel (k*i, k*j) becomes (i, j)).
    CameraIntrinsics scaled(int k) const {
        return {fx / k, fy / k, cx / k, cy / k, width / k, height / k};
    }

    /// Intrinsics for a k x k block-averaged image: each output pixel sits at
    /// the center of its block, so the principal point shifts by (k-1)/2k.
    CameraIntrinsics block_averaged(int k) const {
        return {fx / k, fy / k, (cx + 0.5) / k - 0.5, (cy + 0.5) / k - 0.5, width / k, height / k};
    }

    /// Ray direction with unit z through pixel (u, v).
    Vec3 ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }

    Vec3 back_project(double u, double v, double depth) const { return ray(u, v) * depth; }

    Eigen::Vector2d project(const Vec3& p) const {
        return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
    }

    bool operator==(const CameraIntrinsics&) const = default;
};

/// Row-major 2D grid.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool operator==(const Image&) const = default;
};

/// Raw sensor frame: millimeters, 0 = invalid.
using DepthFrameRaw = Image<std::uint16_t>;
/// Normalized frame: meters, 0 = invalid.
using DepthFrame = Image<float>;

/// Per-pixel camera-frame vertices and unit normals.
struct VertexNormalMap {
    int width = 0;
    int height = 0;
    std::vector<Eigen::Vector3f> vertices;
    std::vector<Eigen::Vector3f> normals;
    std::vector<std::uint8_t> valid;

    VertexNormalMap() = default;
    VertexNormalMap(int w, int h)
        : width(w),
          height(h),
          vertices(static_cast<std::size_t>(w) * h, Eigen::Vector3f::Zero()),
          normals(static_cast<std::size_t>(w) * h, Eigen::Vector3f::Zero()),
          valid(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    std::size_t size() const { return valid.size(); }
    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto v : valid) n += v ? 1 : 0;
        return n;
    }
};

inline void check_frame_matches(int width, int height, const CameraIntrinsics& intr) {
    if (width != intr.width || height != intr.height) {
        throw InvalidInputError("frame is " + std::to_string(width) + "x" + std::to_string(height) +
                                " but intrinsics expect " + std::to_string(intr.width) + "x" +
                                std::to_string(intr.height));
    }
}

}  // namespace approxslam

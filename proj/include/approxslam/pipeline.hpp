#pragma once

// Per-frame fusion loop: preprocessing -> tracking -> integration -> raycasting.

#include "approxslam/camera.hpp"
#include "approxslam/geometry.hpp"
#include "approxslam/icp.hpp"
#include "approxslam/knobs.hpp"
#include "approxslam/precision.hpp"
#include "approxslam/preprocess.hpp"
#include "approxslam/pyramid.hpp"
#include "approxslam/raycast.hpp"
#include "approxslam/tsdf.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>

namespace approxslam {

enum class PrecisionMode { full, reduced };

struct PipelineConfig {
    CameraIntrinsics intrinsics;
    VolumeConfig volume;
    Pose initial_pose;
    PrecisionMode precision = PrecisionMode::full;
    IcpParams icp;
    BilateralParams bilateral;
    RaycastParams raycast;
};

struct PhaseTimings {
    std::int64_t preprocess_ns = 0;
    std::int64_t track_ns = 0;
    std::int64_t integrate_ns = 0;
    std::int64_t raycast_ns = 0;

    std::int64_t total() const { return preprocess_ns + track_ns + integrate_ns + raycast_ns; }
};

struct FrameOutcome {
    TrackResult track;   // measured pose before any correction
    Pose pose;           // pose used for integration and raycasting
    bool integrated = false;
    PhaseTimings timings;
};

/// Optional hook between tracking and integration; returns the pose to use.
using PoseFilter = std::function<Pose(const TrackResult&)>;

namespace detail {

class PhaseClock {
public:
    PhaseClock() : start_(std::chrono::steady_clock::now()) {}
    std::int64_t lap() {
        const auto now = std::chrono::steady_clock::now();
        const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(now - start_).count();
        start_ = now;
        return static_cast<std::int64_t>(ns);
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void quantize_map(VertexNormalMap& m) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m.valid[i]) continue;
        quantize_reduced(std::span<float>(m.vertices[i].data(), 3));
        quantize_reduced(std::span<float>(m.normals[i].data(), 3));
        const float len = m.normals[i].norm();
        if (len > 0.0f) {
            m.normals[i] /= len;
        } else {
            m.valid[i] = 0;
        }
    }
}

}  // namespace detail

class Pipeline {
public:
    explicit Pipeline(const PipelineConfig& config)
        : config_(config), volume_(config.volume), pose_(config.initial_pose) {
        config_.intrinsics.validate();
    }

    const PipelineConfig& config() const { return config_; }
    const TsdfVolume& volume() const { return volume_; }
    const Pose& pose() const { return pose_; }
    int frame_index() const { return frame_index_; }

    DepthFrame preprocess_phase(const DepthFrameRaw& raw, const KnobSettings& knobs) const {
        check_frame_matches(raw.width, raw.height, config_.intrinsics);
        DepthFrame frame = preprocess(raw, knobs.csr, config_.bilateral);
        if (config_.precision == PrecisionMode::reduced) quantize_reduced(frame.data);
        return frame;
    }

    FrameOutcome process_frame(const DepthFrameRaw& raw, const KnobSettings& knobs, const PoseFilter& filter = {}) {
        knobs.validate();
        FrameOutcome out;
        detail::PhaseClock clock;

        const DepthFrame frame = preprocess_phase(raw, knobs);
        const CameraIntrinsics intr = config_.intrinsics.scaled(knobs.csr);
        out.timings.preprocess_ns = clock.lap();

        const bool first = frame_index_ == 0 || !has_reference_;
        if (first) {
            out.track.pose = pose_;
            out.track.tracked = true;
            out.track.inlier_fraction = 1.0;
        } else if (frame_index_ % knobs.tr == 0) {
            const Pyramid current = build_pyramid(frame, intr);
            out.track = icp_track(current, reference_, reference_pose_, pose_, knobs, config_.icp);
            if (!out.track.tracked) out.track.pose = pose_;
        } else {
            out.track.pose = pose_;
            out.track.tracked = true;
        }
        out.timings.track_ns = clock.lap();

        out.pose = filter ? filter(out.track) : out.track.pose;
        pose_ = out.pose;
        clock.lap();

        if (frame_index_ % knobs.ir == 0 && (out.track.tracked || frame_index_ < 4)) {
            tsdf_integrate(volume_, frame, pose_, intr);
            out.integrated = true;
        }
        out.timings.integrate_ns = clock.lap();

        RaycastResult rc = raycast(volume_, pose_, intr, config_.raycast);
        if (config_.precision == PrecisionMode::reduced) detail::quantize_map(rc.maps);
        reference_ = build_map_pyramid(rc.maps, intr);
        reference_pose_ = pose_;
        has_reference_ = true;
        out.timings.raycast_ns = clock.lap();

        ++frame_index_;
        return out;
    }

private:
    PipelineConfig config_;
    TsdfVolume volume_;
    Pose pose_;
    Pyramid reference_;
    Pose reference_pose_;
    bool has_reference_ = false;
    int frame_index_ = 0;
};

}  // namespace approxslam

#include "approxslam/config.hpp"
#include "approxslam/experiment.hpp"
#include "approxslam/pipeline.hpp"
#include "approxslam/specs.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace approxslam;
using namespace approxslam::testing;

namespace {

DepthFrame to_meters(const DepthFrameRaw& raw) { return subsample_to_meters(raw, 1); }

double angle_deg(const Eigen::Vector3f& a, const Eigen::Vector3f& b) {
    return std::acos(std::clamp(static_cast<double>(a.normalized().dot(b.normalized())), -1.0, 1.0)) * 180.0 /
           std::numbers::pi;
}

// Straight double-precision bilateral filter at one pixel.
double bilateral_at(const DepthFrame& f, int x, int y, int r = 2, double ss = 2.0, double sr = 0.1) {
    const double c = f.at(x, y);
    double num = 0, den = 0;
    for (int yy = std::max(0, y - r); yy <= std::min(f.height - 1, y + r); ++yy) {
        for (int xx = std::max(0, x - r); xx <= std::min(f.width - 1, x + r); ++xx) {
            const double d = f.at(xx, yy);
            if (d <= 0) continue;
            const double w = std::exp(-((xx - x) * (xx - x) + (yy - y) * (yy - y)) / (2 * ss * ss)) *
                             std::exp(-(d - c) * (d - c) / (2 * sr * sr));
            num += w * d;
            den += w;
        }
    }
    return num / den;
}

VolumeConfig box_volume() {
    VolumeConfig v;
    v.edge = 2.5;
    v.origin = Vec3(-1.25, -1.25, -0.3);
    return v;
}

}  // namespace

// ---------------------------------------------------------------- preprocess

TEST(Preprocess, ConstantFrameStaysConstant) {
    const DepthFrameRaw raw(320, 240, 2000);
    const DepthFrame out = preprocess(raw, 1);
    ASSERT_EQ(out.width, 320);
    for (float d : out.data) EXPECT_NEAR(d, 2.0f, 1e-6f);
}

TEST(Preprocess, StrideShapes) {
    const DepthFrameRaw raw(320, 240, 1500);
    for (int csr : {1, 2, 4, 8}) {
        const DepthFrame out = preprocess(raw, csr);
        EXPECT_EQ(out.width, 320 / csr);
        EXPECT_EQ(out.height, 240 / csr);
    }
    EXPECT_THROW(preprocess(DepthFrameRaw(322, 240, 1), 4), InvalidInputError);
    EXPECT_THROW(preprocess(raw, 0), InvalidInputError);
}

TEST(Preprocess, StridePicksTopLeftPixel) {
    DepthFrameRaw raw(16, 8, 0);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 16; ++x) raw.at(x, y) = static_cast<std::uint16_t>(1000 + 10 * x + 100 * y);
    }
    const DepthFrame sub = subsample_to_meters(raw, 4);
    EXPECT_NEAR(sub.at(1, 1), (1000 + 40 + 400) * 1e-3f, 1e-6f);
    EXPECT_NEAR(sub.at(3, 0), (1000 + 120) * 1e-3f, 1e-6f);
}

TEST(Preprocess, BilateralMatchesReference) {
    std::mt19937 rng(4);
    std::uniform_int_distribution<int> depth(800, 3000);
    std::bernoulli_distribution hole(0.1);
    DepthFrameRaw raw(40, 30, 0);
    for (auto& px : raw.data) px = hole(rng) ? 0 : static_cast<std::uint16_t>(depth(rng));
    const DepthFrame in = to_meters(raw);
    const DepthFrame out = bilateral_filter(in);
    for (int y = 0; y < 30; ++y) {
        for (int x = 0; x < 40; ++x) {
            if (in.at(x, y) <= 0) {
                EXPECT_EQ(out.at(x, y), 0.0f);
            } else {
                EXPECT_NEAR(out.at(x, y), bilateral_at(in, x, y), 1e-5) << x << "," << y;
            }
        }
    }
}

TEST(Preprocess, EdgesArePreserved) {
    DepthFrameRaw raw(20, 20, 1000);
    for (int y = 0; y < 20; ++y) {
        for (int x = 10; x < 20; ++x) raw.at(x, y) = 3000;
    }
    const DepthFrame out = preprocess(raw, 1);
    EXPECT_NEAR(out.at(9, 10), 1.0f, 1e-4f);
    EXPECT_NEAR(out.at(10, 10), 3.0f, 1e-4f);
}

// ---------------------------------------------------------------- pyramid

TEST(Pyramid, LevelShapes) {
    const CameraIntrinsics intr = CameraIntrinsics{}.scaled(4);
    const Pyramid p = build_pyramid(DepthFrame(80, 60, 2.0f), intr);
    ASSERT_EQ(p.size(), 3u);
    EXPECT_EQ(p[0].map.width, 80);
    EXPECT_EQ(p[0].map.height, 60);
    EXPECT_EQ(p[1].map.width, 40);
    EXPECT_EQ(p[1].map.height, 30);
    EXPECT_EQ(p[2].map.width, 20);
    EXPECT_EQ(p[2].map.height, 15);
}

TEST(Pyramid, WallNormalsFaceCamera) {
    const CameraIntrinsics intr;
    const Pyramid p = build_pyramid(to_meters(render_depth(wall_scene(), Pose::identity(), intr)), intr);
    for (const auto& level : p) {
        ASSERT_GT(level.map.valid_count(), 0u);
        for (std::size_t i = 0; i < level.map.size(); ++i) {
            if (!level.map.valid[i]) continue;
            EXPECT_LT((level.map.normals[i] - Eigen::Vector3f(0, 0, -1)).cwiseAbs().maxCoeff(), 1e-3f);
        }
    }
}

TEST(Pyramid, VerticesReprojectToPixelCenters) {
    const CameraIntrinsics intr;
    // Double-precision camera model: exact to 1e-6 px.
    for (int v = 0; v < 240; v += 7) {
        for (int u = 0; u < 320; u += 11) {
            const auto px = intr.project(intr.back_project(u, v, 0.5 + 0.01 * u));
            EXPECT_NEAR(px.x(), u, 1e-6);
            EXPECT_NEAR(px.y(), v, 1e-6);
        }
    }
    // Stored maps hold float vertices, so allow float rounding at each level.
    const Pyramid p = build_pyramid(to_meters(render_depth(box_scene(), Pose::identity(), intr)), intr);
    for (const auto& level : p) {
        for (int y = 0; y < level.map.height; ++y) {
            for (int x = 0; x < level.map.width; ++x) {
                const std::size_t i = level.map.index(x, y);
                if (!level.map.valid[i]) continue;
                const auto px = level.intrinsics.project(level.map.vertices[i].cast<double>());
                EXPECT_NEAR(px.x(), x, 1e-4);
                EXPECT_NEAR(px.y(), y, 1e-4);
            }
        }
    }
}

TEST(Pyramid, FrameSizeMustMatchIntrinsics) {
    EXPECT_THROW(build_pyramid(DepthFrame(80, 60, 1.0f), CameraIntrinsics{}), InvalidInputError);
}

// ---------------------------------------------------------------- ICP

TEST(Icp, IdenticalInputsGiveIdentity) {
    const CameraIntrinsics intr;
    const Pyramid p = build_pyramid(preprocess(render_depth(box_scene(), Pose::identity(), intr), 1), intr);
    const TrackResult r = icp_track(p, p, Pose::identity(), Pose::identity(), KnobSettings::most_accurate());
    EXPECT_TRUE(r.tracked);
    EXPECT_LT(max_abs_diff(r.pose.matrix(), Mat4::Identity()), 1e-6);
    EXPECT_LT(r.rms_residual, 1e-6);
}

TEST(Icp, RecoversCentimeterMotion) {
    const CameraIntrinsics intr;
    const Pose prev = Pose::identity();
    const Pose truth = Pose::from_translation({0.01, 0, 0});
    const Pyramid ref = build_pyramid(preprocess(render_depth(box_scene(), prev, intr), 1), intr);
    const Pyramid cur = build_pyramid(preprocess(render_depth(box_scene(), truth, intr), 1), intr);
    const TrackResult r = icp_track(cur, ref, prev, prev, KnobSettings::most_accurate());
    EXPECT_TRUE(r.tracked);
    EXPECT_LT((r.pose.translation() - truth.translation()).norm(), 1e-3);
    EXPECT_LT(rotation_angle(pose_delta(r.pose, truth)), 2e-3);
}

TEST(Icp, RecoversSmallRotation) {
    const CameraIntrinsics intr;
    const Pose truth(Eigen::AngleAxisd(0.02, Vec3::UnitY()).toRotationMatrix(), Vec3(0.004, -0.003, 0.006));
    const Pyramid ref = build_pyramid(preprocess(render_depth(box_scene(), Pose::identity(), intr), 1), intr);
    const Pyramid cur = build_pyramid(preprocess(render_depth(box_scene(), truth, intr), 1), intr);
    const TrackResult r = icp_track(cur, ref, Pose::identity(), Pose::identity(), KnobSettings::most_accurate());
    EXPECT_TRUE(r.tracked);
    EXPECT_LT((r.pose.translation() - truth.translation()).norm(), 2e-3);
    EXPECT_LT(rotation_angle(pose_delta(r.pose, truth)), 2e-3);
}

TEST(Icp, FeaturelessWallCannotTrackSideways) {
    const CameraIntrinsics intr;
    const Pose truth = Pose::from_translation({0.01, 0, 0});
    const Pyramid ref = build_pyramid(preprocess(render_depth(wall_scene(), Pose::identity(), intr), 1), intr);
    const Pyramid cur = build_pyramid(preprocess(render_depth(wall_scene(), truth, intr), 1), intr);
    const TrackResult r = icp_track(cur, ref, Pose::identity(), Pose::identity(), KnobSettings::most_accurate());
    const double err = (r.pose.translation() - truth.translation()).norm();
    EXPECT_TRUE(!r.tracked || err >= 5e-3) << "tracked with error " << err;
    if (!r.tracked && r.degenerate) EXPECT_TRUE(approx_equal(r.pose, Pose::identity(), 0.0));
}

TEST(Icp, IterationCapsAreHonored) {
    const CameraIntrinsics intr;
    const Pose truth = Pose::from_translation({0.01, 0.005, 0});
    const Pyramid ref = build_pyramid(preprocess(render_depth(box_scene(), Pose::identity(), intr), 1), intr);
    const Pyramid cur = build_pyramid(preprocess(render_depth(box_scene(), truth, intr), 1), intr);
    KnobSettings k = KnobSettings::most_accurate();
    k.pd = {2, 1, 1};
    const TrackResult r = icp_track(cur, ref, Pose::identity(), Pose::identity(), k);
    EXPECT_LE(r.iterations_used[0], 2);
    EXPECT_LE(r.iterations_used[1], 1);
    EXPECT_LE(r.iterations_used[2], 1);
}

// ---------------------------------------------------------------- TSDF

namespace {

// 64^3 volume of 5 cm voxels whose z centers fall on multiples of 5 cm.
VolumeConfig aligned_volume() {
    VolumeConfig v;
    v.resolution = 64;
    v.edge = 3.2;
    v.origin = Vec3(-1.6, -1.6, -0.825);
    v.mu = 0.1;
    return v;
}

int z_index_for(const VolumeConfig& v, double z) {
    return static_cast<int>(std::lround((z - v.origin.z()) / v.voxel_size() - 0.5));
}

}  // namespace

TEST(Tsdf, WallExamples) {
    const VolumeConfig cfg = aligned_volume();
    TsdfVolume vol(cfg);
    const CameraIntrinsics intr;
    tsdf_integrate(vol, DepthFrame(320, 240, 2.0f), Pose::identity(), intr);
    const int zi15 = z_index_for(cfg, 1.5), zi20 = z_index_for(cfg, 2.0), zi205 = z_index_for(cfg, 2.05);
    ASSERT_NEAR(vol.voxel_center(32, 32, zi205).z(), 2.05, 1e-12);
    EXPECT_FLOAT_EQ(vol.tsdf(32, 32, zi15), 1.0f);
    EXPECT_LT(std::abs(vol.tsdf(32, 32, zi20)), cfg.voxel_size() / cfg.mu);
    EXPECT_NEAR(vol.tsdf(32, 32, zi205), -0.5f, 1e-6f);
    EXPECT_EQ(vol.weight(32, 32, zi205), 1.0f);
    // Beyond -mu behind the surface nothing is written.
    EXPECT_EQ(vol.weight(32, 32, z_index_for(cfg, 2.2)), 0.0f);
    EXPECT_EQ(vol.tsdf(32, 32, z_index_for(cfg, 2.2)), 1.0f);
}

TEST(Tsdf, MatchesProjectiveFormula) {
    const VolumeConfig cfg = box_volume();
    TsdfVolume vol(cfg);
    const CameraIntrinsics intr;
    const Pose pose(Eigen::AngleAxisd(0.1, Vec3(0.2, 1, 0).normalized()).toRotationMatrix(), Vec3(0.05, -0.02, 0.1));
    const DepthFrame frame = to_meters(render_depth(box_scene(), pose, intr));
    tsdf_integrate(vol, frame, pose, intr);

    std::mt19937 rng(8);
    std::uniform_int_distribution<int> idx(0, cfg.resolution - 1);
    const Mat4 w2c = pose.matrix().inverse();
    int checked = 0;
    for (int trial = 0; trial < 20000; ++trial) {
        const int x = idx(rng), y = idx(rng), z = idx(rng);
        const Vec3 c = cfg.origin + (Vec3(x, y, z) + Vec3::Constant(0.5)) * cfg.voxel_size();
        const Vec3 pc = (w2c * c.homogeneous()).head<3>();
        float expected_t = 1.0f, expected_w = 0.0f;
        if (pc.z() > 0) {
            const double u = std::round(intr.fx * pc.x() / pc.z() + intr.cx);
            const double v = std::round(intr.fy * pc.y() / pc.z() + intr.cy);
            if (u >= 0 && v >= 0 && u < intr.width && v < intr.height) {
                const double d = frame.at(static_cast<int>(u), static_cast<int>(v));
                if (d > 0 && d - pc.z() >= -cfg.mu) {
                    expected_t = static_cast<float>(std::clamp((d - pc.z()) / cfg.mu, -1.0, 1.0));
                    expected_w = 1.0f;
                    ++checked;
                }
            }
        }
        EXPECT_NEAR(vol.tsdf(x, y, z), expected_t, 1e-5f);
        EXPECT_EQ(vol.weight(x, y, z), expected_w);
    }
    EXPECT_GT(checked, 1000);
}

TEST(Tsdf, ValuesStayInBounds) {
    std::mt19937 rng(12);
    std::uniform_real_distribution<float> depth(0.2f, 4.0f);
    std::bernoulli_distribution hole(0.2);
    VolumeConfig cfg;
    cfg.resolution = 32;
    cfg.max_weight = 3.0f;
    TsdfVolume vol(cfg);
    const CameraIntrinsics intr = CameraIntrinsics{}.scaled(4);
    for (int i = 0; i < 5; ++i) {
        DepthFrame f(80, 60, 0.0f);
        for (auto& d : f.data) d = hole(rng) ? 0.0f : depth(rng);
        tsdf_integrate(vol, f, Pose::from_translation({0.01 * i, 0, 0}), intr);
    }
    for (std::size_t i = 0; i < vol.tsdf_data().size(); ++i) {
        EXPECT_GE(vol.tsdf_data()[i], -1.0f);
        EXPECT_LE(vol.tsdf_data()[i], 1.0f);
        EXPECT_GE(vol.weight_data()[i], 0.0f);
        EXPECT_LE(vol.weight_data()[i], 3.0f);
    }
}

TEST(Tsdf, RepeatedFrameDoublesWeight) {
    const CameraIntrinsics intr;
    const DepthFrame frame = to_meters(render_depth(box_scene(), Pose::identity(), intr));
    TsdfVolume once(box_volume());
    TsdfVolume twice(box_volume());
    tsdf_integrate(once, frame, Pose::identity(), intr);
    tsdf_integrate(twice, frame, Pose::identity(), intr);
    tsdf_integrate(twice, frame, Pose::identity(), intr);
    for (std::size_t i = 0; i < once.tsdf_data().size(); ++i) {
        EXPECT_EQ(twice.weight_data()[i], 2.0f * once.weight_data()[i]);
        EXPECT_NEAR(twice.tsdf_data()[i], once.tsdf_data()[i], 1e-6f);
    }
}

TEST(Tsdf, RejectsBadConfig) {
    VolumeConfig v;
    v.resolution = 4;
    EXPECT_THROW(TsdfVolume{v}, InvalidInputError);
    v = VolumeConfig{};
    v.mu = 0;
    EXPECT_THROW(TsdfVolume{v}, InvalidInputError);
}

// ---------------------------------------------------------------- raycast

TEST(Raycast, EmptyVolumeHasNoSurface) {
    const TsdfVolume vol;
    const RaycastResult r = raycast(vol, Pose::identity(), CameraIntrinsics{});
    EXPECT_EQ(r.maps.valid_count(), 0u);
    for (float d : r.depth.data) EXPECT_EQ(d, 0.0f);
}

TEST(Raycast, WallRoundTrip) {
    const CameraIntrinsics intr;
    TsdfVolume vol;
    const DepthFrame frame = to_meters(render_depth(wall_scene(), Pose::identity(), intr));
    tsdf_integrate(vol, frame, Pose::identity(), intr);
    const RaycastResult r = raycast(vol, Pose::identity(), intr);
    double sum = 0;
    int n = 0;
    for (int v = 0; v < intr.height; ++v) {
        for (int u = 0; u < intr.width; ++u) {
            const std::size_t i = r.maps.index(u, v);
            if (!r.maps.valid[i]) continue;
            sum += std::abs(r.depth.at(u, v) - frame.at(u, v));
            ++n;
            EXPECT_LT(angle_deg(r.maps.normals[i], Eigen::Vector3f(0, 0, -1)), 5.0);
        }
    }
    ASSERT_GT(n, intr.width * intr.height / 2);
    EXPECT_LT(sum / n, vol.voxel_size());
}

TEST(Raycast, BoxSceneRoundTripFromOffsetPose) {
    const CameraIntrinsics intr;
    TsdfVolume vol(box_volume());
    const Pose pose(look_at_rotation(Vec3(0.1, -0.05, 0.05), Vec3(0, 0.1, 1.6)), Vec3(0.1, -0.05, 0.05));
    const DepthFrame frame = to_meters(render_depth(box_scene(), pose, intr));
    tsdf_integrate(vol, frame, pose, intr);
    const RaycastResult r = raycast(vol, pose, intr);
    std::vector<double> diffs;
    for (int v = 0; v < intr.height; ++v) {
        for (int u = 0; u < intr.width; ++u) {
            if (!r.maps.valid[r.maps.index(u, v)] || frame.at(u, v) <= 0) continue;
            diffs.push_back(std::abs(r.depth.at(u, v) - frame.at(u, v)));
        }
    }
    ASSERT_GT(diffs.size(), 20000u);
    std::sort(diffs.begin(), diffs.end());
    EXPECT_LT(diffs[diffs.size() / 2], 0.25 * vol.voxel_size());
}

// ---------------------------------------------------------------- process_frame

TEST(ProcessFrame, FirstFrameBootstraps) {
    PipelineConfig pc;
    pc.volume = box_volume();
    pc.initial_pose = Pose::from_translation({0.02, 0, 0});
    Pipeline p(pc);
    const auto raw = render_depth(box_scene(), pc.initial_pose, pc.intrinsics);
    const FrameOutcome out = p.process_frame(raw, KnobSettings::most_accurate());
    EXPECT_TRUE(out.integrated);
    EXPECT_TRUE(out.track.tracked);
    EXPECT_TRUE(approx_equal(out.pose, pc.initial_pose, 0.0));
    EXPECT_GT(*std::max_element(p.volume().weight_data().begin(), p.volume().weight_data().end()), 0.0f);
}

TEST(ProcessFrame, FilterReplacesPose) {
    PipelineConfig pc;
    pc.volume = box_volume();
    Pipeline p(pc);
    const auto raw = render_depth(box_scene(), Pose::identity(), pc.intrinsics);
    p.process_frame(raw, KnobSettings::most_accurate());
    const Pose forced = Pose::from_translation({0.001, 0.002, 0.003});
    const FrameOutcome out = p.process_frame(raw, KnobSettings::most_accurate(), [&](const TrackResult&) { return forced; });
    EXPECT_TRUE(approx_equal(out.pose, forced, 0.0));
    EXPECT_TRUE(approx_equal(p.pose(), forced, 0.0));
    EXPECT_LT(max_abs_diff(out.track.pose.matrix(), Mat4::Identity()), 5e-3);
}

TEST(ProcessFrame, RejectsWrongFrameSize) {
    Pipeline p(PipelineConfig{});
    EXPECT_THROW(p.process_frame(DepthFrameRaw(160, 120, 1000), KnobSettings::most_accurate()), InvalidInputError);
    KnobSettings bad;
    bad.csr = 3;
    EXPECT_THROW(p.process_frame(DepthFrameRaw(320, 240, 1000), bad), InvalidInputError);
}

TEST(ProcessFrame, ReducedPrecisionQuantizesInput) {
    PipelineConfig pc;
    pc.precision = PrecisionMode::reduced;
    Pipeline p(pc);
    DepthFrameRaw raw(320, 240, 2001);
    const DepthFrame f = p.preprocess_phase(raw, KnobSettings::most_accurate());
    for (float d : f.data) EXPECT_EQ(d, quantize_half(d));
}

namespace {

Dataset noiseless_room(int frames) {
    SuiteSpec s = load_suite("room");
    s.noise_enabled = false;
    return simulate_prefix(s, frames);
}

RunSettings fixed_run(int csr) {
    RunSettings rs;
    rs.volume = box_volume();
    rs.controller.strategy = Strategy::fixed;
    rs.controller.fixed_knobs = KnobSettings::most_accurate();
    rs.controller.fixed_knobs.csr = csr;
    return rs;
}

}  // namespace

TEST(ProcessFrame, NoiselessRoomLevelZeroTracksEveryFrame) {
    const Dataset ds = noiseless_room(50);
    const RunResult r = run_sequence(ds, fixed_run(1));
    ASSERT_EQ(r.logs.size(), 50u);
    for (const auto& l : r.logs) EXPECT_TRUE(l.tracked) << "frame " << l.frame;
    EXPECT_LT(r.report.ate_m, 0.01);
}

TEST(ProcessFrame, CoarseInputIsFaster) {
    const Dataset ds = noiseless_room(20);
    auto front_end = [](const RunResult& r) {
        std::vector<double> t;
        for (const auto& l : r.logs) t.push_back(static_cast<double>(l.preprocess_ns + l.track_ns));
        return median_of(t);
    };
    const double fine = front_end(run_sequence(ds, fixed_run(1)));
    const double coarse = front_end(run_sequence(ds, fixed_run(8)));
    EXPECT_LT(coarse, fine);
}

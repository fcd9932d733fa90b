#pragma once

// Online approximation controller: bootstrap, PID on the velocity proxy,
// smooth-surface detection and pose correction, plus a step-wise variant that
// moves one knob by one notch per frame.

#include "approxslam/camera.hpp"
#include "approxslam/errors.hpp"
#include "approxslam/geometry.hpp"
#include "approxslam/knobs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <string>
#include <vector>

namespace approxslam {

/// Discrete approximation level; 0 is most accurate. Arithmetic saturates.
class ApproxLevel {
public:
    static constexpr int kMin = 0;
    static constexpr int kMax = 3;

    constexpr ApproxLevel() = default;
    explicit ApproxLevel(int value) : value_(value) {
        if (value < kMin || value > kMax) throw InvalidInputError("approximation level must be in [0, 3]");
    }

    constexpr int value() const { return value_; }
    ApproxLevel raised() const { return ApproxLevel(std::min(value_ + 1, kMax)); }
    ApproxLevel lowered() const { return ApproxLevel(std::max(value_ - 1, kMin)); }

    bool operator==(const ApproxLevel&) const = default;

private:
    int value_ = 0;
};

enum class Strategy {
    accurate,           // level-0 knobs on every frame
    fixed,              // knobs from the config on every frame ("default")
    pid,                // PID + surface detection + pose correction
    pid_only,           // PID alone
    pid_no_surface,     // PID + pose correction
    pid_no_correction,  // PID + surface detection
    step,               // one-knob-at-a-time controller + both triggers
};

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::accurate: return "accurate";
        case Strategy::fixed: return "default";
        case Strategy::pid: return "pid";
        case Strategy::pid_only: return "pid_only";
        case Strategy::pid_no_surface: return "pid_no_surface";
        case Strategy::pid_no_correction: return "pid_no_correction";
        case Strategy::step: return "step";
    }
    return "?";
}

inline Strategy strategy_from_string(const std::string& s) {
    for (Strategy v : {Strategy::accurate, Strategy::fixed, Strategy::pid, Strategy::pid_only, Strategy::pid_no_surface,
                       Strategy::pid_no_correction, Strategy::step}) {
        if (s == to_string(v)) return v;
    }
    throw InvalidInputError("unknown strategy '" + s + "'");
}

inline bool uses_surface_trigger(Strategy s) {
    return s == Strategy::pid || s == Strategy::pid_no_correction || s == Strategy::step;
}
inline bool uses_pose_correction(Strategy s) {
    return s == Strategy::pid || s == Strategy::pid_no_surface || s == Strategy::step;
}
inline bool is_adaptive(Strategy s) { return s != Strategy::accurate && s != Strategy::fixed; }

struct ControllerConfig {
    double v_ref = 0.02;                          // m/frame
    double correction_threshold = 0.06;           // m/frame
    double rotation_correction_threshold = 0.087;  // rad/frame
    double surface_sigma_threshold = 0.1;         // m
    int samples_per_quadrant = 64;
    double margin_fraction = 0.1;
    int bootstrap_frames = 20;                    // also the velocity window length
    double p_levels = 4.0;                        // P term: level = floor((v_ref - v) / v_ref * p_levels)
    int min_quadrant_samples = 10;
    Strategy strategy = Strategy::pid;
    KnobSettings fixed_knobs;                     // used by Strategy::fixed

    void validate() const {
        if (!(v_ref > 0.0)) throw InvalidInputError("v_ref must be positive");
        if (!(correction_threshold > 0.0) || !(rotation_correction_threshold > 0.0)) {
            throw InvalidInputError("correction thresholds must be positive");
        }
        if (!(surface_sigma_threshold > 0.0)) throw InvalidInputError("surface sigma threshold must be positive");
        if (samples_per_quadrant < 1) throw InvalidInputError("samples per quadrant must be >= 1");
        if (!(margin_fraction >= 0.0 && margin_fraction < 0.5)) throw InvalidInputError("margin fraction must be in [0, 0.5)");
        if (bootstrap_frames < 1) throw InvalidInputError("bootstrap frames must be >= 1");
        if (!(p_levels > 0.0)) throw InvalidInputError("p_levels must be positive");
        fixed_knobs.validate();
    }
};

/// Level -> knob table shared by every adaptive strategy.
inline constexpr std::array<int, 4> kCsrByLevel = {1, 2, 4, 8};
inline constexpr std::array<double, 4> kIcpByLevel = {1e-8, 1e-7, 1e-6, 1e-5};
inline constexpr std::array<int, 4> kPd0ByLevel = {10, 8, 6, 4};

inline KnobSettings knobs_for_level(ApproxLevel level) {
    const auto i = static_cast<std::size_t>(level.value());
    KnobSettings k;
    k.csr = kCsrByLevel[i];
    k.icp_threshold = kIcpByLevel[i];
    k.pd = {kPd0ByLevel[i], 5, 4};
    return k;
}

/// Step position in [0, 9]: csr notches first, then icp, then pd0.
inline constexpr int kStepPositions = 9;

inline KnobSettings knobs_for_step(int position) {
    position = std::clamp(position, 0, kStepPositions);
    const auto csr = static_cast<std::size_t>(std::min(position, 3));
    const auto icp = static_cast<std::size_t>(std::clamp(position - 3, 0, 3));
    const auto pd0 = static_cast<std::size_t>(std::clamp(position - 6, 0, 3));
    KnobSettings k;
    k.csr = kCsrByLevel[csr];
    k.icp_threshold = kIcpByLevel[icp];
    k.pd = {kPd0ByLevel[pd0], 5, 4};
    return k;
}

struct ControllerState {
    std::deque<double> velocity_window;  // post-bootstrap velocities, newest last
    Pose prev_pose;
    Transform prev_transform;
    bool correction_trigger = false;
    int frame_index = 0;
    int bootstrap_frames = 20;
    int step_position = 0;
    double last_velocity = 0.0;

    explicit ControllerState(int bootstrap = 20) : bootstrap_frames(bootstrap) {}
    bool in_bootstrap() const { return frame_index < bootstrap_frames; }
};

inline ApproxLevel pid_step(const ControllerState& state, double v_prev, const ControllerConfig& cfg) {
    ApproxLevel level;
    if (v_prev < cfg.v_ref) {
        const double p = std::floor((cfg.v_ref - v_prev) / cfg.v_ref * cfg.p_levels);
        level = ApproxLevel(static_cast<int>(std::clamp(p, 0.0, 3.0)));
    }
    const auto& w = state.velocity_window;
    if (!w.empty()) {
        const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
        if (mean > cfg.v_ref) level = level.lowered();
    }
    if (static_cast<int>(w.size()) >= state.bootstrap_frames && w.size() >= 2) {
        bool decreasing = true;
        bool increasing = true;
        for (std::size_t i = 1; i < w.size(); ++i) {
            if (!(w[i] < w[i - 1])) decreasing = false;
            if (!(w[i] > w[i - 1])) increasing = false;
        }
        if (decreasing) level = level.raised();
        if (increasing) level = level.lowered();
    }
    return level;
}

struct QuadrantStats {
    int samples = 0;
    double sigma = 0.0;
};

/// Per-quadrant population standard deviation of depth over a uniform grid
/// of at most samples_per_quadrant pixels, skipping the frame margins.
inline std::array<QuadrantStats, 4> surface_statistics(const DepthFrame& frame, const ControllerConfig& cfg) {
    std::array<QuadrantStats, 4> out{};
    const int mx = static_cast<int>(std::floor(cfg.margin_fraction * frame.width));
    const int my = static_cast<int>(std::floor(cfg.margin_fraction * frame.height));
    const int n = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(cfg.samples_per_quadrant)))));
    const int half_w = frame.width / 2;
    const int half_h = frame.height / 2;
    for (int q = 0; q < 4; ++q) {
        const int x_lo = std::max(q % 2 ? half_w : 0, mx);
        const int x_hi = std::min(q % 2 ? frame.width : half_w, frame.width - mx);
        const int y_lo = std::max(q / 2 ? half_h : 0, my);
        const int y_hi = std::min(q / 2 ? frame.height : half_h, frame.height - my);
        if (x_hi <= x_lo || y_hi <= y_lo) continue;
        std::vector<int> xs, ys;
        for (int k = 0; k < n; ++k) {
            xs.push_back(x_lo + k * (x_hi - x_lo) / n);
            ys.push_back(y_lo + k * (y_hi - y_lo) / n);
        }
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
        double sum = 0.0;
        double sum2 = 0.0;
        int count = 0;
        for (int y : ys) {
            for (int x : xs) {
                const double d = frame.at(x, y);
                if (!(d > 0.0)) continue;
                sum += d;
                sum2 += d * d;
                ++count;
            }
        }
        out[static_cast<std::size_t>(q)].samples = count;
        if (count > 0) {
            const double mean = sum / count;
            out[static_cast<std::size_t>(q)].sigma = std::sqrt(std::max(0.0, sum2 / count - mean * mean));
        }
    }
    return out;
}

inline bool surface_detection(const DepthFrame& frame, const ControllerConfig& cfg) {
    for (const auto& q : surface_statistics(frame, cfg)) {
        if (q.samples < cfg.min_quadrant_samples || !(q.sigma < cfg.surface_sigma_threshold)) return false;
    }
    return true;
}

/// Coarse metric view of a raw frame for surface detection: every 8th pixel,
/// millimeters to meters, no filtering.
inline DepthFrame surface_probe(const DepthFrameRaw& raw, int stride = 8) {
    DepthFrame out(raw.width / stride, raw.height / stride, 0.0f);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) out.at(x, y) = raw.at(x * stride, y * stride) * 0.001f;
    }
    return out;
}

struct CorrectionResult {
    Pose pose;
    bool triggered = false;
    double velocity = 0.0;  // of the measured pose, m/frame
    double rotation = 0.0;  // of the measured pose, rad/frame
};

/// Replaces an implausible measured pose by extrapolating the last accepted
/// inter-frame transform; updates prev_pose, prev_transform and the trigger.
inline CorrectionResult pose_correction(ControllerState& state, const Pose& measured, const ControllerConfig& cfg) {
    CorrectionResult r;
    const Transform delta = pose_delta(measured, state.prev_pose);
    r.velocity = velocity_of(delta);
    r.rotation = rotation_angle(delta);
    if (r.velocity > cfg.correction_threshold || r.rotation > cfg.rotation_correction_threshold) {
        r.pose = compose(state.prev_pose, state.prev_transform);
        r.triggered = true;
    } else {
        r.pose = measured;
        state.prev_transform = delta;
    }
    state.correction_trigger = r.triggered;
    state.prev_pose = r.pose;
    return r;
}

struct ControlDecision {
    KnobSettings knobs;
    ApproxLevel level;          // PID level after triggers (adaptive strategies)
    bool surface_trigger = false;
    bool correction_trigger = false;  // previous frame's, as consumed here
};

/// Chooses the knobs for the next frame. `frame` is the surface-detection view
/// of that frame; `v_prev` the previous frame's velocity.
inline ControlDecision controller_step(ControllerState& state, const DepthFrame& frame, double v_prev,
                                       const ControllerConfig& cfg) {
    ControlDecision d;
    if (cfg.strategy == Strategy::accurate) {
        d.knobs = KnobSettings::most_accurate();
        return d;
    }
    if (cfg.strategy == Strategy::fixed) {
        d.knobs = cfg.fixed_knobs;
        return d;
    }
    if (state.in_bootstrap()) {
        d.knobs = cfg.strategy == Strategy::step ? knobs_for_step(0) : knobs_for_level(ApproxLevel(0));
        return d;
    }
    ApproxLevel level = pid_step(state, v_prev, cfg);
    d.surface_trigger = uses_surface_trigger(cfg.strategy) && surface_detection(frame, cfg);
    d.correction_trigger = uses_pose_correction(cfg.strategy) && state.correction_trigger;
    const bool trigger = d.surface_trigger || d.correction_trigger;
    if (trigger) level = level.lowered();
    d.level = level;
    if (cfg.strategy == Strategy::step) {
        const int target = 3 * level.value();
        int& s = state.step_position;
        if (trigger) {
            s = std::max(s - 1, 0);
        } else if (s < target) {
            ++s;
        } else if (s > target) {
            --s;
        }
        d.knobs = knobs_for_step(s);
    } else {
        d.knobs = knobs_for_level(level);
    }
    return d;
}

/// Records the velocity of a finished frame and advances the frame counter.
inline void controller_observe(ControllerState& state, double velocity) {
    state.last_velocity = velocity;
    if (!state.in_bootstrap()) {
        state.velocity_window.push_back(velocity);
        while (static_cast<int>(state.velocity_window.size()) > state.bootstrap_frames) {
            state.velocity_window.pop_front();
        }
    }
    ++state.frame_index;
}

}  // namespace approxslam

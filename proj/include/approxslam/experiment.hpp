#pragma once

// Drives the pipeline and controller over a dataset, producing the frame log,
// the estimated trajectory and a run report; plus knob sweeps and the
// ablation ladder built on top of single runs.

#include "approxslam/controller.hpp"
#include "approxslam/dataset.hpp"
#include "approxslam/evaluation.hpp"
#include "approxslam/pipeline.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace approxslam {

struct RunSettings {
    VolumeConfig volume;
    PrecisionMode precision = PrecisionMode::full;
    ControllerConfig controller;
    IcpParams icp;
    int max_frames = 0;  // 0 = all
    std::string label;
    std::string config_echo;
};

inline const char* to_string(PrecisionMode m) { return m == PrecisionMode::reduced ? "reduced" : "full"; }

inline PrecisionMode precision_from_string(const std::string& s) {
    if (s == "full") return PrecisionMode::full;
    if (s == "reduced") return PrecisionMode::reduced;
    throw InvalidInputError("unknown precision mode '" + s + "'");
}

struct RunResult {
    std::vector<FrameLog> logs;
    std::vector<Pose> poses;
    RunReport report;
};

inline RunResult run_sequence(const Dataset& ds, const RunSettings& settings) {
    if (ds.frames.empty()) throw DatasetError("dataset has no frames");
    settings.controller.validate();
    const ControllerConfig& cfg = settings.controller;
    const std::size_t n = settings.max_frames > 0
                              ? std::min(ds.frames.size(), static_cast<std::size_t>(settings.max_frames))
                              : ds.frames.size();

    PipelineConfig pc;
    pc.intrinsics = ds.intrinsics;
    pc.volume = settings.volume;
    pc.initial_pose = ds.has_ground_truth() ? ds.ground_truth.front() : Pose::identity();
    pc.precision = settings.precision;
    pc.icp = settings.icp;
    Pipeline pipeline(pc);

    ControllerState state(cfg.bootstrap_frames);
    state.prev_pose = pc.initial_pose;
    const bool adaptive = is_adaptive(cfg.strategy);
    const bool correct = uses_pose_correction(cfg.strategy);

    RunResult result;
    result.logs.reserve(n);
    result.poses.reserve(n);
    using clock = std::chrono::steady_clock;
    auto ns_since = [](clock::time_point t0) {
        return static_cast<std::int64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0).count());
    };

    for (std::size_t t = 0; t < n; ++t) {
        const DepthFrameRaw& raw = ds.frames[t];
        FrameLog log;
        log.frame = static_cast<int>(t);

        auto t0 = clock::now();
        DepthFrame probe;
        if (adaptive && !state.in_bootstrap() && uses_surface_trigger(cfg.strategy)) probe = surface_probe(raw);
        const ControlDecision decision = controller_step(state, probe, state.last_velocity, cfg);
        log.controller_ns = ns_since(t0);

        const bool bootstrap = state.in_bootstrap();
        double velocity = 0.0;
        bool corrected = false;
        std::int64_t filter_ns = 0;
        const PoseFilter filter = [&](const TrackResult& tr) {
            const auto f0 = clock::now();
            Pose out = tr.pose;
            if (adaptive && correct && !bootstrap) {
                const CorrectionResult cr = pose_correction(state, tr.pose, cfg);
                velocity = cr.velocity;
                corrected = cr.triggered;
                out = cr.pose;
            } else {
                const Transform delta = pose_delta(tr.pose, state.prev_pose);
                velocity = velocity_of(delta);
                if (!bootstrap) state.prev_transform = delta;
                state.prev_pose = tr.pose;
                state.correction_trigger = false;
            }
            filter_ns = ns_since(f0);
            return out;
        };
        const FrameOutcome outcome = pipeline.process_frame(raw, decision.knobs, filter);

        const auto o0 = clock::now();
        controller_observe(state, velocity);
        log.controller_ns += filter_ns + ns_since(o0);

        log.level = decision.level.value();
        log.csr = decision.knobs.csr;
        log.icp = decision.knobs.icp_threshold;
        log.pd0 = decision.knobs.pd[0];
        log.velocity = velocity;
        log.surface_trigger = decision.surface_trigger;
        log.correction_trigger = corrected;
        log.tracked = outcome.track.tracked;
        if (ds.has_ground_truth()) log.ite_m = compute_ite(outcome.pose, ds.ground_truth[t]);
        log.preprocess_ns = outcome.timings.preprocess_ns;
        log.track_ns = outcome.timings.track_ns;
        log.integrate_ns = outcome.timings.integrate_ns;
        log.raycast_ns = outcome.timings.raycast_ns;
        result.logs.push_back(log);
        result.poses.push_back(outcome.pose);
    }
    result.report = make_report(result.logs, settings.label, to_string(cfg.strategy), to_string(settings.precision),
                                settings.config_echo);
    return result;
}

// ---------------------------------------------------------------- sweeps

struct SweepRow {
    std::string knob;
    double value = 0.0;
    double ate_m = 0.0;
    double mean_frame_ns = 0.0;
    double median_frame_ns = 0.0;
};

/// Sets one knob of the level-0 baseline; throws for unknown knob names.
inline KnobSettings with_knob(KnobSettings k, const std::string& knob, double value) {
    if (knob == "csr") {
        k.csr = static_cast<int>(value);
    } else if (knob == "icp") {
        k.icp_threshold = value;
    } else if (knob == "pd0") {
        k.pd[0] = static_cast<int>(value);
    } else if (knob == "pd1") {
        k.pd[1] = static_cast<int>(value);
    } else if (knob == "pd2") {
        k.pd[2] = static_cast<int>(value);
    } else {
        throw InvalidInputError("unknown knob '" + knob + "' (expected csr, icp, pd0, pd1 or pd2)");
    }
    k.validate();
    return k;
}

/// Default sweep values: the level table for csr/icp/pd0, 1..5 for pd1/pd2.
inline std::vector<double> default_sweep_values(const std::string& knob) {
    if (knob == "csr") return {1, 2, 4, 8};
    if (knob == "icp") return {1e-8, 1e-7, 1e-6, 1e-5};
    if (knob == "pd0") return {10, 8, 6, 4};
    if (knob == "pd1" || knob == "pd2") return {5, 4, 3, 2, 1};
    throw InvalidInputError("unknown knob '" + knob + "'");
}

inline std::vector<SweepRow> knob_ranking_sweep(const Dataset& ds, RunSettings base, const std::string& knob,
                                                const std::vector<double>& values) {
    std::vector<SweepRow> rows;
    for (double v : values) {
        RunSettings s = base;
        s.controller.strategy = Strategy::fixed;
        s.controller.fixed_knobs = with_knob(KnobSettings::most_accurate(), knob, v);
        const RunResult r = run_sequence(ds, s);
        rows.push_back({knob, v, r.report.ate_m, r.report.mean_frame_ns, r.report.median_frame_ns});
    }
    return rows;
}

struct LadderRung {
    std::string name;
    Strategy strategy;
    PrecisionMode precision;
};

inline std::vector<LadderRung> ablation_rungs() {
    return {{"default", Strategy::accurate, PrecisionMode::full},
            {"pid", Strategy::pid_only, PrecisionMode::full},
            {"pid+surface", Strategy::pid_no_correction, PrecisionMode::full},
            {"pid+surface+correction", Strategy::pid, PrecisionMode::full},
            {"full", Strategy::pid, PrecisionMode::reduced}};
}

inline std::vector<RunReport> ablation_ladder(const Dataset& ds, const RunSettings& base) {
    std::vector<RunReport> out;
    for (const auto& rung : ablation_rungs()) {
        RunSettings s = base;
        s.controller.strategy = rung.strategy;
        s.precision = rung.precision;
        s.label = rung.name;
        out.push_back(run_sequence(ds, s).report);
    }
    return out;
}

inline void write_sweep(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "knob,value,ate_m,mean_frame_ns,median_frame_ns\n";
    for (const auto& r : rows) {
        out << r.knob << ',' << detail::fmt_double(r.value) << ',' << detail::fmt_double(r.ate_m) << ','
            << detail::fmt_double(r.mean_frame_ns) << ',' << detail::fmt_double(r.median_frame_ns) << '\n';
    }
}

}  // namespace approxslam

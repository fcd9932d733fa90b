#pragma once

// Trajectory metrics, per-frame logs and run reports.

#include "approxslam/dataset.hpp"
#include "approxslam/errors.hpp"
#include "approxslam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace approxslam {

/// Positional distance between two poses, meters (orientation is ignored).
inline double compute_ite(const Pose& est, const Pose& truth) {
    return (est.translation() - truth.translation()).norm();
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Mean ITE over paired poses; no alignment.
inline double compute_ate(const std::vector<Pose>& est, const std::vector<Pose>& truth) {
    if (est.size() != truth.size()) {
        throw TrajectoryError("trajectory lengths differ: " + std::to_string(est.size()) + " vs " +
                              std::to_string(truth.size()));
    }
    if (est.empty()) throw TrajectoryError("empty trajectories");
    std::vector<double> ite(est.size());
    for (std::size_t i = 0; i < est.size(); ++i) ite[i] = compute_ite(est[i], truth[i]);
    return mean_of(ite);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidInputError("correlation inputs differ in length");
    if (x.size() < 2) throw UndefinedCorrelationError("need at least two samples");
    const auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
    };
    if (constant(x) || constant(y)) throw UndefinedCorrelationError("zero variance input");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw UndefinedCorrelationError("zero variance input");
    return sxy / std::sqrt(sxx * syy);
}

struct FrameLog {
    int frame = 0;
    int level = 0;
    int csr = 1;
    double icp = 1e-8;
    int pd0 = 10;
    double velocity = 0.0;
    bool surface_trigger = false;
    bool correction_trigger = false;
    bool tracked = true;
    double ite_m = std::numeric_limits<double>::quiet_NaN();  // NaN without ground truth
    std::int64_t preprocess_ns = 0;
    std::int64_t track_ns = 0;
    std::int64_t integrate_ns = 0;
    std::int64_t raycast_ns = 0;
    std::int64_t controller_ns = 0;

    std::int64_t pipeline_ns() const { return preprocess_ns + track_ns + integrate_ns + raycast_ns; }
    std::int64_t frame_ns() const { return pipeline_ns() + controller_ns; }
    bool has_ite() const { return !std::isnan(ite_m); }
};

/// Pearson r between velocity and ITE over frames with ground truth.
inline double velocity_error_correlation(const std::vector<FrameLog>& logs, std::size_t min_frames = 30) {
    std::vector<double> v, e;
    for (const auto& l : logs) {
        if (!l.has_ite()) continue;
        v.push_back(l.velocity);
        e.push_back(l.ite_m);
    }
    if (v.size() < min_frames) {
        throw InvalidInputError("need at least " + std::to_string(min_frames) + " frames with ground truth");
    }
    return pearson(v, e);
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct KnobChanges {
    int csr = 0;
    int icp = 0;
    int pd0 = 0;

    int total() const { return csr + icp + pd0; }
    bool operator==(const KnobChanges&) const = default;
};

inline KnobChanges count_knob_changes(const std::vector<FrameLog>& logs) {
    KnobChanges c;
    for (std::size_t i = 1; i < logs.size(); ++i) {
        c.csr += logs[i].csr != logs[i - 1].csr;
        c.icp += logs[i].icp != logs[i - 1].icp;
        c.pd0 += logs[i].pd0 != logs[i - 1].pd0;
    }
    return c;
}

struct RunReport {
    std::string label;
    std::string strategy;
    std::string precision;
    int frames = 0;
    double ate_m = std::numeric_limits<double>::quiet_NaN();
    double tracked_fraction = 0.0;
    double mean_frame_ns = 0.0;
    double median_frame_ns = 0.0;
    double total_frame_ns = 0.0;
    KnobChanges knob_changes;
    int surface_triggers = 0;
    int correction_triggers = 0;
    std::string config;  // compact JSON echo of the run configuration
};

inline RunReport make_report(const std::vector<FrameLog>& logs, std::string label, std::string strategy,
                             std::string precision, std::string config) {
    RunReport r;
    r.label = std::move(label);
    r.strategy = std::move(strategy);
    r.precision = std::move(precision);
    r.config = std::move(config);
    r.frames = static_cast<int>(logs.size());
    std::vector<double> ite, times;
    int tracked = 0;
    for (const auto& l : logs) {
        if (l.has_ite()) ite.push_back(l.ite_m);
        times.push_back(static_cast<double>(l.frame_ns()));
        r.total_frame_ns += static_cast<double>(l.frame_ns());
        tracked += l.tracked;
        r.surface_triggers += l.surface_trigger;
        r.correction_triggers += l.correction_trigger;
    }
    if (!ite.empty()) r.ate_m = mean_of(ite);
    r.tracked_fraction = logs.empty() ? 0.0 : static_cast<double>(tracked) / static_cast<double>(logs.size());
    r.mean_frame_ns = mean_of(times);
    r.median_frame_ns = median_of(times);
    r.knob_changes = count_knob_changes(logs);
    return r;
}

inline bool nearly(double a, double b, double tol) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

/// Recomputes every report field from the frame log; returns the names of
/// fields that disagree (empty when consistent).
inline std::vector<std::string> verify_report(const RunReport& report, const std::vector<FrameLog>& logs) {
    const RunReport again = make_report(logs, report.label, report.strategy, report.precision, report.config);
    std::vector<std::string> bad;
    if (again.frames != report.frames) bad.push_back("frames");
    if (!nearly(again.ate_m, report.ate_m, 1e-9)) bad.push_back("ate_m");
    if (!nearly(again.tracked_fraction, report.tracked_fraction, 1e-9)) bad.push_back("tracked_fraction");
    if (!nearly(again.mean_frame_ns, report.mean_frame_ns, 1e-9)) bad.push_back("mean_frame_ns");
    if (!nearly(again.median_frame_ns, report.median_frame_ns, 1e-9)) bad.push_back("median_frame_ns");
    if (!(again.knob_changes == report.knob_changes)) bad.push_back("knob_changes");
    if (again.surface_triggers != report.surface_triggers) bad.push_back("surface_triggers");
    if (again.correction_triggers != report.correction_triggers) bad.push_back("correction_triggers");
    return bad;
}

struct CorrectionCheck {
    int corrected_frames = 0;
    double max_error = 0.0;  // max abs matrix entry difference over corrected frames
};

/// Replays the correction bookkeeping from the logged poses alone: after
/// bootstrap the held transform starts at identity and follows every
/// uncorrected inter-frame delta; each corrected pose must equal the previous
/// pose composed with the held transform.
inline CorrectionCheck verify_pose_corrections(const std::vector<FrameLog>& logs, const std::vector<Pose>& poses,
                                               int bootstrap_frames) {
    if (logs.size() != poses.size()) throw TrajectoryError("frame log and trajectory lengths differ");
    CorrectionCheck c;
    Transform held;
    for (std::size_t t = 1; t < poses.size(); ++t) {
        if (static_cast<int>(t) < bootstrap_frames) continue;
        if (logs[t].correction_trigger) {
            ++c.corrected_frames;
            c.max_error = std::max(c.max_error, max_abs_diff(compose(poses[t - 1], held).matrix(), poses[t].matrix()));
        } else {
            held = pose_delta(poses[t], poses[t - 1]);
        }
    }
    return c;
}

// ---------------------------------------------------------------- CSV

inline constexpr const char* kFrameLogHeader =
    "frame,level,csr,icp,pd0,velocity,surface_trigger,correction_trigger,tracked,ite_m,"
    "preprocess_ns,track_ns,integrate_ns,raycast_ns,controller_ns";

namespace detail {

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

inline void write_frame_log(std::ostream& out, const std::vector<FrameLog>& logs) {
    out << kFrameLogHeader << '\n';
    for (const auto& l : logs) {
        out << l.frame << ',' << l.level << ',' << l.csr << ',' << detail::fmt_double(l.icp) << ',' << l.pd0 << ','
            << detail::fmt_double(l.velocity) << ',' << int(l.surface_trigger) << ',' << int(l.correction_trigger)
            << ',' << int(l.tracked) << ',' << detail::fmt_double(l.ite_m) << ',' << l.preprocess_ns << ','
            << l.track_ns << ',' << l.integrate_ns << ',' << l.raycast_ns << ',' << l.controller_ns << '\n';
    }
}

inline std::vector<FrameLog> read_frame_log(std::istream& in, const std::string& name = "frame log") {
    std::string line;
    if (!std::getline(in, line) || line != kFrameLogHeader) {
        throw DatasetError(name + ": missing or unexpected header");
    }
    std::vector<FrameLog> logs;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto c = detail::split_csv(line);
        if (c.size() != 15) throw DatasetError(name + ":" + std::to_string(line_no) + ": expected 15 columns");
        try {
            FrameLog l;
            l.frame = std::stoi(c[0]);
            l.level = std::stoi(c[1]);
            l.csr = std::stoi(c[2]);
            l.icp = std::stod(c[3]);
            l.pd0 = std::stoi(c[4]);
            l.velocity = std::stod(c[5]);
            l.surface_trigger = c[6] == "1";
            l.correction_trigger = c[7] == "1";
            l.tracked = c[8] == "1";
            l.ite_m = c[9].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(c[9]);
            l.preprocess_ns = std::stoll(c[10]);
            l.track_ns = std::stoll(c[11]);
            l.integrate_ns = std::stoll(c[12]);
            l.raycast_ns = std::stoll(c[13]);
            l.controller_ns = std::stoll(c[14]);
            logs.push_back(l);
        } catch (const std::logic_error&) {
            throw DatasetError(name + ":" + std::to_string(line_no) + ": unparsable value");
        }
    }
    return logs;
}

inline void write_frame_log(const std::filesystem::path& path, const std::vector<FrameLog>& logs) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot open for writing: " + path.string());
    write_frame_log(out, logs);
    if (!out) throw DatasetError("failed writing " + path.string());
}

inline std::vector<FrameLog> read_frame_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path.string());
    return read_frame_log(in, path.string());
}

inline constexpr const char* kReportHeader =
    "label,strategy,precision,frames,ate_m,tracked_fraction,mean_frame_ns,median_frame_ns,"
    "csr_changes,icp_changes,pd0_changes,surface_triggers,correction_triggers";

inline void write_reports(std::ostream& out, const std::vector<RunReport>& reports) {
    out << kReportHeader << '\n';
    for (const auto& r : reports) {
        out << r.label << ',' << r.strategy << ',' << r.precision << ',' << r.frames << ','
            << detail::fmt_double(r.ate_m) << ',' << detail::fmt_double(r.tracked_fraction) << ','
            << detail::fmt_double(r.mean_frame_ns) << ',' << detail::fmt_double(r.median_frame_ns) << ','
            << r.knob_changes.csr << ',' << r.knob_changes.icp << ',' << r.knob_changes.pd0 << ','
            << r.surface_triggers << ',' << r.correction_triggers << '\n';
    }
}

inline void write_reports(const std::filesystem::path& path, const std::vector<RunReport>& reports) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot open for writing: " + path.string());
    write_reports(out, reports);
    if (!out) throw DatasetError("failed writing " + path.string());
}

}  // namespace approxslam

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any of them fails.

#include "approxslam/config.hpp"
#include "approxslam/evaluation.hpp"
#include "approxslam/experiment.hpp"
#include "approxslam/preprocess.hpp"
#include "approxslam/raycast.hpp"
#include "approxslam/tsdf.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <tuple>

using namespace approxslam;
namespace fs = std::filesystem;

namespace {

const fs::path kSource(APPROXSLAM_SOURCE_DIR);
const std::vector<std::string> kSuites = {"room", "wall-pass", "fast-turn"};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

class Runs {
public:
    const RunConfig& config(const std::string& suite) {
        auto it = configs_.find(suite);
        if (it == configs_.end()) {
            it = configs_.emplace(suite, load_run_config(kSource / "configs" / (suite + ".json"), {})).first;
        }
        return it->second;
    }

    const Dataset& dataset(const std::string& suite, bool noise) {
        const auto key = std::make_pair(suite, noise);
        auto it = datasets_.find(key);
        if (it == datasets_.end()) {
            RunConfig rc = config(suite);
            rc.noise = noise;
            it = datasets_.emplace(key, load_config_dataset(rc)).first;
        }
        return it->second;
    }

    RunSettings settings(const std::string& suite, Strategy s, PrecisionMode p) {
        RunSettings rs = config(suite).settings;
        rs.controller.strategy = s;
        rs.precision = p;
        return rs;
    }

    const RunResult& run(const std::string& suite, Strategy s, PrecisionMode p, bool noise = true) {
        const auto key = std::make_tuple(suite, s, p, noise);
        auto it = runs_.find(key);
        if (it == runs_.end()) {
            const auto t0 = std::chrono::steady_clock::now();
            RunResult r = run_sequence(dataset(suite, noise), settings(suite, s, p));
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::printf("  .. %s %s %s%s: ATE %.4f m, %.1f s\n", suite.c_str(), to_string(s), to_string(p),
                        noise ? "" : " noiseless", r.report.ate_m, secs);
            std::fflush(stdout);
            it = runs_.emplace(key, std::move(r)).first;
        }
        return it->second;
    }

private:
    std::map<std::string, RunConfig> configs_;
    std::map<std::pair<std::string, bool>, Dataset> datasets_;
    std::map<std::tuple<std::string, Strategy, PrecisionMode, bool>, RunResult> runs_;
};

struct Outcome {
    bool pass;
    std::string detail;
};

double total_pipeline_ns(const std::vector<FrameLog>& logs) {
    double s = 0;
    for (const auto& l : logs) s += static_cast<double>(l.pipeline_ns());
    return s;
}

// ---------------------------------------------------------------- criteria

Outcome fusion_round_trip(Runs&) {
    const SuiteSpec suite = suite_from_json(load_json_file(kSource / "data" / "suites" / "wall.json"));
    const auto t0 = std::chrono::steady_clock::now();
    const Pose pose = interpolate_trajectory(suite.trajectory).front();
    const DepthFrame frame = subsample_to_meters(render_depth(suite.scene, pose, suite.camera), 1);
    TsdfVolume vol{VolumeConfig{}};
    tsdf_integrate(vol, frame, pose, suite.camera);
    const RaycastResult r = raycast(vol, pose, suite.camera);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double sum = 0;
    int n = 0;
    for (int v = 0; v < frame.height; ++v) {
        for (int u = 0; u < frame.width; ++u) {
            if (!r.maps.valid[r.maps.index(u, v)] || frame.at(u, v) <= 0.0f) continue;
            sum += std::abs(r.depth.at(u, v) - frame.at(u, v));
            ++n;
        }
    }
    const double mean = n ? sum / n : INFINITY;
    return {n > 0 && mean < vol.voxel_size() && secs < 10.0,
            fmt("mean |dz| %.4f m over ", mean) + std::to_string(n) + fmt(" px (voxel %.4f m), %.2f s", vol.voxel_size(), secs)};
}

Outcome accurate_tracking(Runs& runs) {
    const RunResult& r = runs.run("room", Strategy::accurate, PrecisionMode::full, false);
    return {r.report.tracked_fraction == 1.0 && r.report.ate_m < 0.005,
            fmt("tracked %.3f, ATE %.5f m", r.report.tracked_fraction, r.report.ate_m)};
}

Outcome error_bound(Runs& runs) {
    bool ok = true;
    std::string d;
    for (const auto& s : kSuites) {
        const double ate = runs.run(s, Strategy::pid, PrecisionMode::reduced).report.ate_m;
        ok = ok && ate <= 0.05;
        d += s + fmt(" %.4f m  ", ate);
    }
    return {ok, d};
}

Outcome compute_saving(Runs& runs) {
    bool ok = true;
    std::string d;
    for (const auto& s : kSuites) {
        const double base = total_pipeline_ns(runs.run(s, Strategy::accurate, PrecisionMode::full).logs);
        const double ctl = total_pipeline_ns(runs.run(s, Strategy::pid, PrecisionMode::reduced).logs);
        const double saving = 1.0 - ctl / base;
        ok = ok && saving >= 0.30;
        d += s + fmt(" -%.1f%%  ", 100 * saving);
    }
    return {ok, d};
}

Outcome ablation_ordering(Runs& runs) {
    const double pid_only = runs.run("wall-pass", Strategy::pid_only, PrecisionMode::full).report.ate_m;
    const double full_pid = runs.run("wall-pass", Strategy::pid, PrecisionMode::full).report.ate_m;
    return {pid_only > 2.0 * full_pid,
            fmt("pid-only %.4f m vs pid+surface+correction %.4f m", pid_only, full_pid) +
                fmt(" (ratio %.2f)", pid_only / full_pid)};
}

Outcome correction_exactness(Runs& runs) {
    bool ok = true;
    int corrected = 0;
    double worst = 0;
    const fs::path dir = fs::temp_directory_path() / ("approxslam-acceptance-" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    for (const auto& s : kSuites) {
        const RunResult& r = runs.run(s, Strategy::pid, PrecisionMode::reduced);
        const fs::path traj = dir / (s + ".txt");
        write_trajectory(traj, make_trajectory(r.poses));
        std::stringstream log_csv;
        write_frame_log(log_csv, r.logs);
        const auto logs = read_frame_log(log_csv);
        const auto poses = read_trajectory(traj).poses;
        const CorrectionCheck c = verify_pose_corrections(logs, poses, runs.config(s).settings.controller.bootstrap_frames);
        int logged = 0;
        for (const auto& l : logs) logged += l.correction_trigger;
        ok = ok && c.corrected_frames == logged && c.max_error <= 1e-12;
        corrected += c.corrected_frames;
        worst = std::max(worst, c.max_error);
    }
    fs::remove_all(dir);
    return {ok && corrected > 0, std::to_string(corrected) + fmt(" corrected frames, max error %.2e", worst)};
}

Outcome knob_ranking(Runs& runs) {
    const Dataset& ds = runs.dataset("room", true);
    RunSettings base = runs.settings("room", Strategy::fixed, PrecisionMode::full);
    base.max_frames = 40;
    std::map<std::string, double> range;
    std::vector<double> csr_medians;
    for (const std::string knob : {"csr", "icp", "pd0"}) {
        const auto rows = knob_ranking_sweep(ds, base, knob, default_sweep_values(knob));
        double lo = INFINITY, hi = 0;
        for (const auto& r : rows) {
            lo = std::min(lo, r.median_frame_ns);
            hi = std::max(hi, r.median_frame_ns);
            if (knob == "csr") csr_medians.push_back(r.median_frame_ns);
        }
        range[knob] = hi - lo;
    }
    bool monotone = true;
    for (std::size_t i = 1; i < csr_medians.size(); ++i) monotone = monotone && csr_medians[i] <= csr_medians[i - 1];
    std::string d = fmt("ranges ms: csr %.2f, icp %.2f", range["csr"] * 1e-6, range["icp"] * 1e-6) +
                    fmt(", pd0 %.2f; csr medians ms:", range["pd0"] * 1e-6);
    for (double m : csr_medians) d += fmt(" %.2f", m * 1e-6);
    return {monotone && range["csr"] > range["icp"] && range["csr"] > range["pd0"], d};
}

Outcome controller_overhead(Runs& runs) {
    bool ok = true;
    std::string d;
    for (const auto& s : kSuites) {
        std::vector<double> ctl, frame;
        for (const auto& l : runs.run(s, Strategy::pid, PrecisionMode::reduced).logs) {
            ctl.push_back(static_cast<double>(l.controller_ns));
            frame.push_back(static_cast<double>(l.frame_ns()));
        }
        const double share = median_of(ctl) / median_of(frame);
        ok = ok && share < 0.05;
        d += s + fmt(" %.3f%%  ", 100 * share);
    }
    return {ok, d};
}

Outcome metric_oracles(Runs& runs) {
    auto at = [](std::vector<Vec3> ps) {
        std::vector<Pose> out;
        for (const auto& p : ps) out.push_back(Pose::from_translation(p));
        return out;
    };
    const auto origin = at({Vec3::Zero(), Vec3::Zero(), Vec3::Zero()});
    const double a = compute_ate(at({Vec3(0.01, 0, 0), Vec3(0, 0.02, 0), Vec3(0, 0, 0.03)}), origin);
    const double b = compute_ate(at({Vec3(0.03, 0.04, 0), Vec3(0.03, 0.04, 0), Vec3(0.03, 0.04, 0)}), origin);
    const bool examples = std::abs(a - 0.02) <= 1e-15 && std::abs(b - 0.05) <= 1e-15;
    const double r = velocity_error_correlation(runs.run("fast-turn", Strategy::pid, PrecisionMode::reduced).logs);
    return {examples && r > 0.0, fmt("ATE examples %.17g, ", a) + fmt("%.17g; fast-turn r = %.3f", b, r)};
}

Outcome reduced_precision(Runs& runs) {
    const double full = runs.run("room", Strategy::pid, PrecisionMode::full).report.ate_m;
    const double reduced = runs.run("room", Strategy::pid, PrecisionMode::reduced).report.ate_m;
    std::mt19937 rng(2024);
    std::uniform_real_distribution<float> u(-70000.0f, 70000.0f);
    std::uniform_real_distribution<float> small(-4.0f, 4.0f);
    std::vector<float> values(1000000);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = i % 2 ? u(rng) : small(rng);
    quantize_reduced(values);
    std::vector<float> again = values;
    quantize_reduced(again);
    const bool idempotent = again == values;
    return {std::abs(full - reduced) <= 0.005 && idempotent,
            fmt("room ATE full %.4f m, reduced %.4f m", full, reduced) + (idempotent ? ", idempotent" : ", NOT idempotent")};
}

int notch(const std::vector<double>& table, double v) {
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i] == v) return static_cast<int>(i);
    }
    return -100;
}

Outcome step_contract(Runs& runs) {
    const std::vector<double> csr = {1, 2, 4, 8}, icp = {1e-8, 1e-7, 1e-6, 1e-5}, pd0 = {10, 8, 6, 4};
    bool ok = true;
    std::string d;
    for (const auto& s : kSuites) {
        const auto& logs = runs.run(s, Strategy::step, PrecisionMode::reduced).logs;
        for (std::size_t t = 1; t < logs.size(); ++t) {
            const int dc = std::abs(notch(csr, logs[t].csr) - notch(csr, logs[t - 1].csr));
            const int di = std::abs(notch(icp, logs[t].icp) - notch(icp, logs[t - 1].icp));
            const int dp = std::abs(notch(pd0, logs[t].pd0) - notch(pd0, logs[t - 1].pd0));
            if (dc + di + dp > 1) ok = false;
        }
        const int step_changes = count_knob_changes(logs).csr;
        const int pid_changes = count_knob_changes(runs.run(s, Strategy::pid, PrecisionMode::reduced).logs).csr;
        ok = ok && step_changes <= pid_changes;
        d += s + " csr changes step " + std::to_string(step_changes) + " / pid " + std::to_string(pid_changes) + "  ";
    }
    return {ok, d};
}

}  // namespace

int main() {
    Runs runs;
    const std::vector<std::pair<std::string, std::function<Outcome(Runs&)>>> criteria = {
        {"fusion round trip", fusion_round_trip},
        {"accurate baseline tracking", accurate_tracking},
        {"error bound under control", error_bound},
        {"compute saving", compute_saving},
        {"ablation ordering on wall-pass", ablation_ordering},
        {"pose correction exactness", correction_exactness},
        {"knob ranking shape", knob_ranking},
        {"controller overhead", controller_overhead},
        {"metric oracles", metric_oracles},
        {"reduced precision", reduced_precision},
        {"step controller contract", step_contract},
    };
    std::vector<std::string> lines;
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second(runs);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::ostringstream line;
        line << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << o.detail;
        lines.push_back(line.str());
        std::printf("%s\n", line.str().c_str());
        std::fflush(stdout);
    }
    std::printf("\nsummary\n");
    for (const auto& l : lines) std::printf("%s\n", l.c_str());
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}

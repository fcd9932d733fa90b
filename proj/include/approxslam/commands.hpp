#pragma once

// Command-line front end: simulate | run | eval | sweep. Every command writes
// into a staging directory next to its target and renames it into place only
// after all outputs are complete.

#include "approxslam/config.hpp"
#include "approxslam/dataset.hpp"
#include "approxslam/evaluation.hpp"
#include "approxslam/experiment.hpp"
#include "approxslam/specs.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace approxslam {

enum class ExitCode : int {
    ok = 0,
    unexpected = 1,
    usage = 2,
    config = 3,
    dataset = 4,
    trajectory = 5,
    output = 6,
};

/// A sibling directory that replaces `target` on commit and is removed otherwise.
class StagedDir {
public:
    explicit StagedDir(fs::path target) : target_(std::move(target)) {
        if (target_.filename().empty()) target_ = target_.parent_path();
        std::random_device rd;
        std::ostringstream name;
        name << '.' << target_.filename().string() << ".staging-" << std::hex << rd();
        staging_ = target_.parent_path() / name.str();
        std::error_code ec;
        if (!target_.parent_path().empty()) fs::create_directories(target_.parent_path(), ec);
        if (ec || !fs::create_directory(staging_, ec) || ec) {
            throw OutputError("cannot create output directory under " + target_.parent_path().string() +
                              (ec ? ": " + ec.message() : std::string()));
        }
    }
    StagedDir(const StagedDir&) = delete;
    StagedDir& operator=(const StagedDir&) = delete;
    ~StagedDir() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(staging_, ec);
        }
    }

    const fs::path& path() const { return staging_; }
    const fs::path& target() const { return target_; }

    void commit() {
        std::error_code ec;
        if (fs::exists(target_, ec)) {
            fs::remove_all(target_, ec);
            if (ec) throw OutputError("cannot replace " + target_.string() + ": " + ec.message());
        }
        fs::rename(staging_, target_, ec);
        if (ec) throw OutputError("cannot move outputs into " + target_.string() + ": " + ec.message());
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path staging_;
    bool committed_ = false;
};

namespace detail {

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
    std::ofstream out(path);
    if (!out) throw OutputError("cannot open " + path.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) throw OutputError("failed writing " + path.string());
}

inline void write_json_file(const fs::path& path, const nlohmann::json& j) {
    write_file(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

inline RunConfig load_cli_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    std::optional<fs::path> path;
    if (!config_path.empty()) {
        path = fs::path(config_path);
        if (!fs::is_regular_file(*path)) throw SpecError("config file not found: " + config_path);
    }
    try {
        return load_run_config(path, overrides);
    } catch (const InvalidInputError& e) {
        throw SpecError(e.what());
    }
}

inline nlohmann::json merged_config_json(const std::string& config_path, const std::vector<std::string>& overrides) {
    nlohmann::json j = config_path.empty() ? nlohmann::json::object() : load_json_file(config_path);
    for (const auto& o : overrides) apply_override(j, o);
    return j;
}

inline fs::path choose_output(const std::string& flag, const std::optional<fs::path>& from_config,
                              const std::string& default_name) {
    if (!flag.empty()) return fs::path(flag);
    if (from_config) return *from_config;
    return default_output_root() / default_name;
}

inline std::vector<double> parse_values(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw SpecError("sweep value '" + item + "' is not a number");
        values.push_back(v);
    }
    if (values.empty()) throw SpecError("sweep values are empty");
    return values;
}

}  // namespace detail

// ---------------------------------------------------------------- commands

struct SimulateOptions {
    std::string suite;
    std::string out;
    int frames = 0;
    std::optional<std::uint64_t> seed;
    bool no_noise = false;
};

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& out) {
    if (!fs::is_regular_file(opt.suite)) throw SpecError("suite file not found: " + opt.suite);
    SuiteSpec suite = suite_from_json(load_json_file(opt.suite));
    if (opt.no_noise) suite.noise_enabled = false;
    if (opt.seed) suite.noise.seed = *opt.seed;
    if (opt.frames < 0) throw SpecError("--frames must be >= 0");
    const Dataset ds = simulate_prefix(suite, opt.frames);

    StagedDir stage(detail::choose_output(opt.out, std::nullopt, suite.name));
    try {
        write_dataset(stage.path(), ds);
    } catch (const DatasetError& e) {
        throw OutputError(e.what());
    }
    nlohmann::json echo = to_json(suite);
    echo["frames_written"] = ds.frames.size();
    detail::write_json_file(stage.path() / "suite.json", echo);
    stage.commit();
    out << "wrote " << ds.frames.size() << " frames to " << stage.target().string() << '\n';
    return 0;
}

struct RunOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
};

inline int cmd_run(const RunOptions& opt, std::ostream& out) {
    const RunConfig rc = detail::load_cli_config(opt.config, opt.overrides);
    const nlohmann::json merged = detail::merged_config_json(opt.config, opt.overrides);
    const Dataset ds = load_config_dataset(rc);
    const RunResult result = run_sequence(ds, rc.settings);

    StagedDir stage(detail::choose_output(opt.out, rc.output_dir, rc.label));
    detail::write_file(stage.path() / "frame_log.csv", [&](std::ostream& o) { write_frame_log(o, result.logs); });
    detail::write_file(stage.path() / "report.csv", [&](std::ostream& o) { write_reports(o, {result.report}); });
    detail::write_file(stage.path() / "trajectory.txt",
                       [&](std::ostream& o) { write_trajectory(o, make_trajectory(result.poses)); });
    if (ds.has_ground_truth()) {
        detail::write_file(stage.path() / "groundtruth.txt",
                           [&](std::ostream& o) { write_trajectory(o, make_trajectory(ds.ground_truth)); });
    }
    detail::write_json_file(stage.path() / "config.json", merged);
    detail::write_json_file(stage.path() / "effective_config.json", rc.echo);
    stage.commit();

    const RunReport& r = result.report;
    out << std::fixed << std::setprecision(6);
    out << "label " << r.label << "  strategy " << r.strategy << "  precision " << r.precision << '\n';
    out << "frames " << r.frames << "  tracked " << r.tracked_fraction << "  ATE_m " << r.ate_m << '\n';
    out << "mean_frame_ms " << r.mean_frame_ns * 1e-6 << "  median_frame_ms " << r.median_frame_ns * 1e-6 << '\n';
    out << "outputs " << stage.target().string() << '\n';
    return 0;
}

struct EvalOptions {
    std::string est;
    std::string truth;
    std::string per_frame;
};

inline int cmd_eval(const EvalOptions& opt, std::ostream& out) {
    const Trajectory est = read_trajectory(fs::path(opt.est));
    const Trajectory truth = read_trajectory(fs::path(opt.truth));
    if (est.size() != truth.size()) {
        throw TrajectoryError("trajectory lengths differ: " + std::to_string(est.size()) + " vs " +
                              std::to_string(truth.size()));
    }
    for (std::size_t i = 0; i < est.size(); ++i) {
        if (est.frame_indices[i] != truth.frame_indices[i]) {
            throw TrajectoryError("frame index mismatch at line " + std::to_string(i + 1));
        }
    }
    const double ate = compute_ate(est.poses, truth.poses);

    if (!opt.per_frame.empty()) {
        const fs::path target(opt.per_frame);
        fs::path tmp = target;
        tmp += ".partial";
        try {
            detail::write_file(tmp, [&](std::ostream& o) {
                o << "frame,ite_m\n" << std::setprecision(17);
                for (std::size_t i = 0; i < est.size(); ++i) {
                    o << est.frame_indices[i] << ',' << compute_ite(est.poses[i], truth.poses[i]) << '\n';
                }
            });
            std::error_code ec;
            fs::rename(tmp, target, ec);
            if (ec) throw OutputError("cannot write " + target.string() + ": " + ec.message());
        } catch (...) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw;
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", ate);
    out << buf << '\n';
    return 0;
}

struct SweepOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    std::string knob;
    std::string values;
    bool ablation = false;
};

inline int cmd_sweep(const SweepOptions& opt, std::ostream& out) {
    if (opt.ablation == !opt.knob.empty()) throw SpecError("sweep needs exactly one of --knob or --ablation");
    const RunConfig rc = detail::load_cli_config(opt.config, opt.overrides);
    const nlohmann::json merged = detail::merged_config_json(opt.config, opt.overrides);
    std::vector<double> values;
    if (!opt.ablation) {
        try {
            values = opt.values.empty() ? default_sweep_values(opt.knob) : detail::parse_values(opt.values);
            for (double v : values) with_knob(KnobSettings::most_accurate(), opt.knob, v);
        } catch (const InvalidInputError& e) {
            throw SpecError(e.what());
        }
    }
    const Dataset ds = load_config_dataset(rc);
    if (!ds.has_ground_truth()) throw DatasetError("sweeps need a dataset with ground truth");

    const std::string name = opt.ablation ? "ablation" : "sweep_" + opt.knob;
    StagedDir stage(detail::choose_output(opt.out, rc.output_dir, rc.label + "-" + name));
    out << std::fixed << std::setprecision(6);
    if (opt.ablation) {
        const auto reports = ablation_ladder(ds, rc.settings);
        detail::write_file(stage.path() / "ablation.csv", [&](std::ostream& o) { write_reports(o, reports); });
        for (const auto& r : reports) {
            out << std::left << std::setw(24) << r.label << " ATE_m " << r.ate_m << "  mean_frame_ms "
                << r.mean_frame_ns * 1e-6 << '\n';
        }
    } else {
        const auto rows = knob_ranking_sweep(ds, rc.settings, opt.knob, values);
        detail::write_file(stage.path() / (name + ".csv"), [&](std::ostream& o) { write_sweep(o, rows); });
        for (const auto& r : rows) {
            out << opt.knob << '=' << detail::fmt_double(r.value) << "  ATE_m " << r.ate_m
                << "  mean_frame_ms " << r.mean_frame_ns * 1e-6 << '\n';
        }
    }
    detail::write_json_file(stage.path() / "config.json", merged);
    stage.commit();
    out << "outputs " << stage.target().string() << '\n';
    return 0;
}

// ---------------------------------------------------------------- entry point

inline int exit_code_for_current_exception(std::ostream& err) {
    try {
        throw;
    } catch (const SpecError& e) {
        err << "config error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::config);
    } catch (const InvalidInputError& e) {
        err << "invalid input: " << e.what() << '\n';
        return static_cast<int>(ExitCode::config);
    } catch (const DatasetError& e) {
        err << "dataset error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::dataset);
    } catch (const TrajectoryError& e) {
        err << "trajectory error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::trajectory);
    } catch (const OutputError& e) {
        err << "output error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::output);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::unexpected);
    } catch (...) {
        err << "error: unknown failure\n";
        return static_cast<int>(ExitCode::unexpected);
    }
}

inline constexpr const char* kExitCodeHelp =
    "Exit codes: 0 success, 1 unexpected error, 2 usage error, 3 invalid config or spec,\n"
    "4 dataset error, 5 trajectory error, 6 output could not be written.\n"
    "Outputs go to --out, else the config's output_dir, else $APPROXSLAM_OUTPUT_ROOT/<name>\n"
    "(./out/<name> when the variable is unset). Nothing is left behind on failure.";

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Dense depth-camera SLAM with an online approximation controller"};
    app.footer(kExitCodeHelp);
    app.require_subcommand(1);

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Render a suite spec into a dataset directory (PGM frames + ground truth)");
    simulate->add_option("--suite", sim.suite, "Suite spec JSON (scene, camera, trajectory, noise)")->required();
    simulate->add_option("--out", sim.out, "Dataset directory to create");
    simulate->add_option("--frames", sim.frames, "Render only the first N frames (0 = all)");
    simulate->add_option("--seed", sim.seed, "Override the suite's noise seed");
    simulate->add_flag("--no-noise", sim.no_noise, "Render noiseless depth");

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "Run the pipeline and controller over a dataset; writes frame_log.csv, "
                                              "report.csv, trajectory.txt and the config echo");
    run_cmd->add_option("--config", run.config, "Run config JSON");
    run_cmd->add_option("--set", run.overrides, "Override a config key, e.g. controller.strategy=step (repeatable)");
    run_cmd->add_option("--out", run.out, "Output directory");

    EvalOptions ev;
    auto* eval = app.add_subcommand("eval", "Print the ATE (meters, 6 decimals) of an estimated trajectory");
    eval->add_option("--est", ev.est, "Estimated trajectory file")->required();
    eval->add_option("--truth", ev.truth, "Reference trajectory file")->required();
    eval->add_option("--per-frame", ev.per_frame, "Also write per-frame ITE to this CSV");

    SweepOptions sw;
    auto* sweep = app.add_subcommand("sweep", "Knob-ranking sweep (one knob varied, others at level 0) or the ablation ladder");
    sweep->add_option("--config", sw.config, "Run config JSON");
    sweep->add_option("--set", sw.overrides, "Override a config key (repeatable)");
    sweep->add_option("--out", sw.out, "Output directory");
    sweep->add_option("--knob", sw.knob, "Knob to sweep: csr, icp, pd0, pd1 or pd2");
    sweep->add_option("--values", sw.values, "Comma-separated values (default: the level table for the knob)");
    sweep->add_flag("--ablation", sw.ablation, "Run the strategy ladder instead of a knob sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return static_cast<int>(ExitCode::usage);
    }

    try {
        if (*simulate) return cmd_simulate(sim, out);
        if (*run_cmd) return cmd_run(run, out);
        if (*eval) return cmd_eval(ev, out);
        if (*sweep) return cmd_sweep(sw, out);
    } catch (...) {
        return exit_code_for_current_exception(err);
    }
    return static_cast<int>(ExitCode::usage);
}

}  // namespace approxslam

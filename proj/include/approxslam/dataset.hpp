#pragma once

// On-disk dataset layout:
//
//   <root>/camera.json         intrinsics {fx, fy, cx, cy, width, height}
//   <root>/depth/NNNNNN.pgm    binary PGM (P5), maxval 65535, big-endian, millimeters
//   <root>/groundtruth.txt     "frame tx ty tz qx qy qz qw" per line (optional)
//
// Trajectory text files use the same line format for estimates.

#include "approxslam/camera.hpp"
#include "approxslam/errors.hpp"
#include "approxslam/geometry.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace approxslam {

namespace fs = std::filesystem;

struct Dataset {
    CameraIntrinsics intrinsics;
    std::vector<DepthFrameRaw> frames;
    std::vector<Pose> ground_truth;  // empty when unknown

    bool has_ground_truth() const { return !ground_truth.empty(); }
};

struct Trajectory {
    std::vector<long> frame_indices;
    std::vector<Pose> poses;

    std::size_t size() const { return poses.size(); }
};

// ---------------------------------------------------------------- PGM

inline void write_pgm(const fs::path& path, const DepthFrameRaw& frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetError("cannot open for writing: " + path.string());
    out << "P5\n" << frame.width << ' ' << frame.height << "\n65535\n";
    std::vector<unsigned char> bytes(frame.size() * 2);
    for (std::size_t i = 0; i < frame.size(); ++i) {
        bytes[2 * i] = static_cast<unsigned char>(frame.data[i] >> 8);
        bytes[2 * i + 1] = static_cast<unsigned char>(frame.data[i] & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DatasetError("failed writing " + path.string());
}

namespace detail {

inline bool read_pgm_token(std::istream& in, std::string& token) {
    token.clear();
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (!std::isspace(c)) break;
    }
    if (c == EOF) return false;
    token.push_back(static_cast<char>(c));
    while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#') token.push_back(static_cast<char>(in.get()));
    return true;
}

inline int parse_positive(const std::string& token, const fs::path& path) {
    try {
        std::size_t used = 0;
        const long v = std::stol(token, &used);
        if (used != token.size() || v <= 0 || v > 1'000'000) throw std::out_of_range("range");
        return static_cast<int>(v);
    } catch (const std::logic_error&) {
        throw MalformedHeaderError("bad PGM header field '" + token + "' in " + path.string());
    }
}

}  // namespace detail

inline DepthFrameRaw read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError(path.string());
    std::string tok;
    if (!detail::read_pgm_token(in, tok) || tok != "P5") {
        throw MalformedHeaderError("not a binary PGM (P5): " + path.string());
    }
    int dims[3];
    for (int& d : dims) {
        if (!detail::read_pgm_token(in, tok)) throw MalformedHeaderError("truncated PGM header: " + path.string());
        d = detail::parse_positive(tok, path);
    }
    if (dims[2] > 65535) throw MalformedHeaderError("PGM maxval above 65535: " + path.string());
    in.get();  // single whitespace after maxval
    DepthFrameRaw frame(dims[0], dims[1]);
    const bool wide = dims[2] > 255;
    const std::size_t bytes_per = wide ? 2 : 1;
    std::vector<unsigned char> bytes(frame.size() * bytes_per);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
        throw MalformedHeaderError("PGM payload shorter than its header declares: " + path.string());
    }
    for (std::size_t i = 0; i < frame.size(); ++i) {
        frame.data[i] = wide ? static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]) : bytes[i];
    }
    return frame;
}

// ---------------------------------------------------------------- trajectories

inline void write_trajectory(std::ostream& out, const Trajectory& traj) {
    out << "# frame tx ty tz qx qy qz qw\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const Pose& p = traj.poses[i];
        Eigen::Quaterniond q(p.rotation());
        q.normalize();
        if (q.w() < 0) q.coeffs() *= -1.0;
        out << traj.frame_indices[i] << ' ' << p.translation().x() << ' ' << p.translation().y() << ' '
            << p.translation().z() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
    }
}

inline Trajectory make_trajectory(const std::vector<Pose>& poses) {
    Trajectory t;
    t.poses = poses;
    t.frame_indices.resize(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) t.frame_indices[i] = static_cast<long>(i);
    return t;
}

inline void write_trajectory(const fs::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot open for writing: " + path.string());
    write_trajectory(out, traj);
    if (!out) throw DatasetError("failed writing " + path.string());
}

inline Trajectory read_trajectory(std::istream& in, const std::string& name = "trajectory") {
    Trajectory traj;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        long idx;
        double v[7];
        if (!(ss >> idx)) throw TrajectoryError(name + ":" + std::to_string(line_no) + ": bad frame index");
        for (double& x : v) {
            if (!(ss >> x)) throw TrajectoryError(name + ":" + std::to_string(line_no) + ": expected 8 fields");
        }
        std::string extra;
        if (ss >> extra) throw TrajectoryError(name + ":" + std::to_string(line_no) + ": trailing fields");
        Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
        if (!(q.norm() > 1e-9)) throw TrajectoryError(name + ":" + std::to_string(line_no) + ": zero quaternion");
        q.normalize();
        traj.frame_indices.push_back(idx);
        traj.poses.emplace_back(q.toRotationMatrix(), Vec3(v[0], v[1], v[2]));
    }
    return traj;
}

inline Trajectory read_trajectory(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path.string());
    return read_trajectory(in, path.string());
}

// ---------------------------------------------------------------- intrinsics JSON

inline nlohmann::json to_json(const CameraIntrinsics& c) {
    return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

inline CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
    CameraIntrinsics c;
    try {
        c.fx = j.value("fx", c.fx);
        c.fy = j.value("fy", c.fy);
        c.cx = j.value("cx", c.cx);
        c.cy = j.value("cy", c.cy);
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("camera: ") + e.what());
    }
    try {
        c.validate();
    } catch (const InvalidInputError& e) {
        throw SpecError(e.what());
    }
    return c;
}

// ---------------------------------------------------------------- datasets

inline std::string frame_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.pgm", index);
    return buf;
}

inline void write_dataset(const fs::path& root, const Dataset& ds) {
    if (ds.has_ground_truth() && ds.ground_truth.size() != ds.frames.size()) {
        throw DimensionMismatchError("ground truth length does not match frame count");
    }
    for (const auto& f : ds.frames) check_frame_matches(f.width, f.height, ds.intrinsics);
    std::error_code ec;
    fs::create_directories(root / "depth", ec);
    if (ec) throw DatasetError("cannot create " + (root / "depth").string() + ": " + ec.message());
    {
        std::ofstream cam(root / "camera.json");
        if (!cam) throw DatasetError("cannot write " + (root / "camera.json").string());
        cam << to_json(ds.intrinsics).dump(2) << '\n';
    }
    for (std::size_t i = 0; i < ds.frames.size(); ++i) write_pgm(root / "depth" / frame_file_name(i), ds.frames[i]);
    if (ds.has_ground_truth()) write_trajectory(root / "groundtruth.txt", make_trajectory(ds.ground_truth));
}

inline Dataset read_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw MissingFileError(root.string());
    const fs::path cam_path = root / "camera.json";
    std::ifstream cam(cam_path);
    if (!cam) throw MissingFileError(cam_path.string());
    Dataset ds;
    try {
        ds.intrinsics = intrinsics_from_json(nlohmann::json::parse(cam));
    } catch (const nlohmann::json::exception& e) {
        throw MalformedHeaderError(cam_path.string() + ": " + e.what());
    } catch (const SpecError& e) {
        throw MalformedHeaderError(cam_path.string() + ": " + e.what());
    }

    const fs::path depth_dir = root / "depth";
    if (!fs::is_directory(depth_dir)) throw MissingFileError(depth_dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(depth_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (files[i].filename() != frame_file_name(i)) throw MissingFileError((depth_dir / frame_file_name(i)).string());
        ds.frames.push_back(read_pgm(files[i]));
        const auto& f = ds.frames.back();
        if (f.width != ds.intrinsics.width || f.height != ds.intrinsics.height) {
            throw DimensionMismatchError(files[i].string() + " does not match camera.json dimensions");
        }
    }
    if (ds.frames.empty()) throw MissingFileError((depth_dir / frame_file_name(0)).string());

    const fs::path gt_path = root / "groundtruth.txt";
    if (fs::exists(gt_path)) {
        Trajectory gt;
        try {
            gt = read_trajectory(gt_path);
        } catch (const TrajectoryError& e) {
            throw MalformedHeaderError(e.what());
        }
        if (gt.size() != ds.frames.size()) {
            throw DimensionMismatchError("groundtruth.txt has " + std::to_string(gt.size()) + " poses for " +
                                         std::to_string(ds.frames.size()) + " frames");
        }
        ds.ground_truth = std::move(gt.poses);
    }
    return ds;
}

}  // namespace approxslam

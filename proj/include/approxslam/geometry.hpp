#pragma once

// Rigid-body math shared by every stage of the pipeline.
//
// Convention: a Pose maps camera coordinates to world coordinates
// (x_world = R * x_cam + t). Relative motions (Transform) act on the left in
// homogeneous-matrix terms, so compose(pose, T) == T * pose and
// pose_delta(curr, prev) == curr * prev^-1. This one convention is used
// everywhere, including ICP updates and pose correction.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace approxslam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

namespace detail {

template <typename Tag>
class Rigid {
public:
    Rigid() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
    Rigid(const Mat3& rotation, const Vec3& translation)
        : rotation_(rotation), translation_(translation) {}

    static Rigid identity() { return {}; }
    static Rigid from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
    static Rigid from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }
    static Rigid from_matrix(const Mat4& m) {
        return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
    }

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }

    Mat4 matrix() const {
        Mat4 m = Mat4::Identity();
        m.topLeftCorner<3, 3>() = rotation_;
        m.topRightCorner<3, 1>() = translation_;
        return m;
    }

    Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

    /// Projects the rotation back onto SO(3) (polar decomposition via SVD).
    Rigid orthonormalized() const {
        Eigen::JacobiSVD<Mat3> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Mat3 r = svd.matrixU() * svd.matrixV().transpose();
        if (r.determinant() < 0) {
            Mat3 u = svd.matrixU();
            u.col(2) *= -1.0;
            r = u * svd.matrixV().transpose();
        }
        return {r, translation_};
    }

    template <typename OtherTag>
    explicit operator Rigid<OtherTag>() const {
        return Rigid<OtherTag>(rotation_, translation_);
    }

private:
    Mat3 rotation_;
    Vec3 translation_;
};

struct PoseTag {};
struct TransformTag {};

}  // namespace detail

/// Camera-to-world rigid pose.
using Pose = detail::Rigid<detail::PoseTag>;
/// Relative motion between two poses, applied on the left.
using Transform = detail::Rigid<detail::TransformTag>;

/// 6-vector increment used by ICP: linear part in meters, angular part in radians.
struct Twist {
    Vec3 linear = Vec3::Zero();
    Vec3 angular = Vec3::Zero();

    double squared_norm() const { return linear.squaredNorm() + angular.squaredNorm(); }
};

inline Mat3 skew(const Vec3& w) {
    Mat3 s;
    s << 0.0, -w.z(), w.y(),
         w.z(), 0.0, -w.x(),
         -w.y(), w.x(), 0.0;
    return s;
}

/// Applies motion `t` after pose `a`: returns t * a.
inline Pose compose(const Pose& a, const Transform& t) {
    return {t.rotation() * a.rotation(), t.rotation() * a.translation() + t.translation()};
}

/// Transform * Transform (left factor applied last).
inline Transform operator*(const Transform& lhs, const Transform& rhs) {
    return {lhs.rotation() * rhs.rotation(), lhs.rotation() * rhs.translation() + lhs.translation()};
}

inline Transform inverse(const Pose& p) {
    const Mat3 rt = p.rotation().transpose();
    return {rt, -(rt * p.translation())};
}

inline Transform inverse(const Transform& t) {
    const Mat3 rt = t.rotation().transpose();
    return {rt, -(rt * t.translation())};
}

/// Relative transform taking `prev` to `curr`: compose(prev, delta) == curr.
inline Transform pose_delta(const Pose& curr, const Pose& prev) {
    const Mat3 rt = prev.rotation().transpose();
    const Mat3 r = curr.rotation() * rt;
    return {r, curr.translation() - r * prev.translation()};
}

/// Velocity proxy in meters per frame: norm of the translation part only.
inline double velocity_of(const Transform& delta) { return delta.translation().norm(); }

/// Rotation angle of a transform, radians in [0, pi].
inline double rotation_angle(const Transform& delta) {
    const double c = std::clamp((delta.rotation().trace() - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(c);
}

/// SE(3) exponential of a twist.
inline Transform twist_exp(const Twist& x) {
    const Vec3& w = x.angular;
    const double theta2 = w.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 wx = skew(w);
    const Mat3 wx2 = wx * wx;

    double a, b, c;  // sin(t)/t, (1-cos(t))/t^2, (t-sin(t))/t^3
    if (theta < 1e-4) {
        a = 1.0 - theta2 / 6.0;
        b = 0.5 - theta2 / 24.0;
        c = 1.0 / 6.0 - theta2 / 120.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
        c = (theta - std::sin(theta)) / (theta2 * theta);
    }
    const Mat3 r = Mat3::Identity() + a * wx + b * wx2;
    const Mat3 v = Mat3::Identity() + b * wx + c * wx2;
    return {r, v * x.linear};
}

inline double max_abs_diff(const Mat4& a, const Mat4& b) { return (a - b).cwiseAbs().maxCoeff(); }

template <typename Tag>
bool approx_equal(const detail::Rigid<Tag>& a, const detail::Rigid<Tag>& b, double tol) {
    return max_abs_diff(a.matrix(), b.matrix()) <= tol;
}

}  // namespace approxslam

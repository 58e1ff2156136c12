#include "scalevo/geometry.hpp"

#include "scalevo/errors.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace scalevo {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::DegenerateGeometry: return "degenerate-geometry";
        case ErrorKind::PointAtInfinity: return "point-at-infinity";
        case ErrorKind::LowParallax: return "low-parallax";
        case ErrorKind::InvalidPlane: return "invalid-plane";
        case ErrorKind::DegenerateSample: return "degenerate-sample";
        case ErrorKind::FitFailure: return "fit-failure";
        case ErrorKind::DegenerateMotion: return "degenerate-motion";
        case ErrorKind::PureRotation: return "pure-rotation";
        case ErrorKind::SelectionFailure: return "selection-failure";
        case ErrorKind::InvalidGround: return "invalid-ground";
        case ErrorKind::FilterDegenerate: return "filter-degenerate";
        case ErrorKind::NoRatio: return "no-ratio";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Alignment: return "alignment";
        case ErrorKind::Config: return "config";
    }
    return "unknown";
}

CameraIntrinsics::CameraIntrinsics(double fx, double fy, double cx, double cy)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy) {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
        !std::isfinite(cx) || !std::isfinite(cy)) {
        throw Error(ErrorKind::InvalidInput, "camera intrinsics require finite fx, fy > 0");
    }
}

Mat3 CameraIntrinsics::matrix() const {
    Mat3 K;
    K << fx_, 0.0, cx_, 0.0, fy_, cy_, 0.0, 0.0, 1.0;
    return K;
}

Mat3 CameraIntrinsics::inverse() const {
    Mat3 Ki;
    Ki << 1.0 / fx_, 0.0, -cx_ / fx_, 0.0, 1.0 / fy_, -cy_ / fy_, 0.0, 0.0, 1.0;
    return Ki;
}

Vec3 CameraIntrinsics::ray(const Vec2& pixel) const {
    return {(pixel.x() - cx_) / fx_, (pixel.y() - cy_) / fy_, 1.0};
}

Vec2 CameraIntrinsics::project(const Vec3& point) const {
    return {fx_ * point.x() / point.z() + cx_, fy_ * point.y() / point.z() + cy_};
}

Pose Pose::inverse() const {
    Pose inv;
    inv.R = R.transpose();
    inv.t = -(inv.R * t);
    return inv;
}

Pose operator*(const Pose& a, const Pose& b) {
    Pose c;
    c.R = a.R * b.R;
    c.t = a.R * b.t + a.t;
    return c;
}

bool is_rotation(const Mat3& R, double tol) {
    if (!R.allFinite()) return false;
    const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

double rotation_angle(const Mat3& R) {
    // atan2 form stays accurate near zero where acos((tr - 1) / 2) does not.
    const Vec3 axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    return std::atan2(0.5 * axis.norm(), 0.5 * (R.trace() - 1.0));
}

Mat3 axis_angle(const Vec3& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Mat3 skew(const Vec3& v) {
    Mat3 S;
    S << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return S;
}

double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

bool PlaneEstimate::valid(double tol) const {
    return n.allFinite() && std::isfinite(h) && std::abs(n.norm() - 1.0) <= tol && h > 0.0;
}

Mat3 canonical(const Mat3& M) {
    const double norm = M.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw Error(ErrorKind::DegenerateGeometry, "cannot canonicalize a zero or non-finite matrix");
    }
    Mat3 C = M / norm;
    double pivot = C(2, 2);
    if (pivot == 0.0) {
        for (int i = 0; i < 9 && pivot == 0.0; ++i) pivot = C.data()[i];
    }
    if (pivot < 0.0) C = -C;
    return C;
}

Homography::Homography(const Mat3& M, HomographyKind kind) : M_(canonical(M)), kind_(kind) {
    if (std::abs(M_.determinant()) < 1e-12) {
        throw Error(ErrorKind::DegenerateGeometry, "homography is singular");
    }
}

Homography Homography::inverse() const { return {M_.inverse(), kind_}; }

Homography homography_from_motion_plane(const Pose& pose, const PlaneEstimate& plane,
                                        const CameraIntrinsics& K) {
    if (!(plane.h > 0.0)) {
        throw Error(ErrorKind::InvalidPlane, "plane distance must be positive");
    }
    const Mat3 euclidean = pose.R + pose.t * plane.n.transpose() / plane.h;
    const bool identity_K =
        K.fx() == 1.0 && K.fy() == 1.0 && K.cx() == 0.0 && K.cy() == 0.0;
    if (identity_K) return {euclidean, HomographyKind::Euclidean};
    return {K.matrix() * euclidean * K.inverse(), HomographyKind::Projective};
}

Vec2 apply_homography(const Homography& H, const Vec2& x) {
    const Vec3 y = H.matrix() * x.homogeneous();
    const double scale = H.matrix().norm() * (x.norm() + 1.0);
    if (std::abs(y.z()) <= 1e-14 * scale) {
        throw Error(ErrorKind::PointAtInfinity, "homography maps the point to infinity");
    }
    return y.hnormalized();
}

Homography euclidean_from_projective(const Homography& H, const CameraIntrinsics& K) {
    if (H.kind() != HomographyKind::Projective) {
        throw Error(ErrorKind::InvalidInput, "expected a projective homography");
    }
    return {K.inverse() * H.matrix() * K.matrix(), HomographyKind::Euclidean};
}

Point3 triangulate_two_view(const Correspondence& c, const Pose& pose, const CameraIntrinsics& K) {
    const double baseline = pose.t.norm();
    if (!(baseline > 0.0)) {
        throw Error(ErrorKind::LowParallax, "zero baseline");
    }
    const Vec3 r1 = K.ray(c.x1);
    const Vec3 r2 = K.ray(c.x2);

    Eigen::Matrix<double, 3, 4> P2;
    P2 << pose.R, pose.t;
    Eigen::Matrix4d A;
    A.row(0) << -1.0, 0.0, r1.x(), 0.0;
    A.row(1) << 0.0, -1.0, r1.y(), 0.0;
    A.row(2) = r2.x() * P2.row(2) - P2.row(0);
    A.row(3) = r2.y() * P2.row(2) - P2.row(1);
    for (int i = 0; i < 4; ++i) {
        const double n = A.row(i).norm();
        if (n > 0.0) A.row(i) /= n;
    }

    Eigen::JacobiSVD<Eigen::Matrix4d> svd(A, Eigen::ComputeFullV);
    const Eigen::Vector4d Xh = svd.matrixV().col(3);
    const double depth_scale = Xh.head<3>().norm();
    if (std::abs(Xh(3)) <= 1e-15 * depth_scale) {
        throw Error(ErrorKind::LowParallax, "rays are parallel");
    }
    const Point3 X = Xh.head<3>() / Xh(3);
    if (baseline / X.norm() < kMinParallaxRatio) {
        throw Error(ErrorKind::LowParallax,
                    "baseline-to-depth ratio below " + std::to_string(kMinParallaxRatio));
    }
    return X;
}

PlaneEstimate transform_plane(const PlaneEstimate& plane, const Pose& pose) {
    const Vec3 n2 = pose.R * plane.n;
    const double h2 = plane.h + n2.dot(pose.t);
    const double norm = n2.norm();
    if (!(h2 > 0.0)) {
        throw Error(ErrorKind::InvalidPlane, "camera crossed the plane");
    }
    return {n2 / norm, h2 / norm};
}

}  // namespace scalevo

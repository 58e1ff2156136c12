#pragma once

// Two-view and ground-plane geometry primitives.
//
// Pose convention used throughout the library: a Pose (R, t) maps a point
// expressed in frame-1 camera coordinates into frame 2 as X2 = R * X1 + t.
// A plane (n, h) contains the points X with n^T X = h, h > 0 being the
// distance from the camera center to the plane.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <span>

namespace scalevo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics. Construction validates fx, fy > 0.
class CameraIntrinsics {
public:
    CameraIntrinsics(double fx, double fy, double cx, double cy);

    double fx() const { return fx_; }
    double fy() const { return fy_; }
    double cx() const { return cx_; }
    double cy() const { return cy_; }

    Mat3 matrix() const;
    Mat3 inverse() const;

    /// Pixel -> normalized ray with unit last coordinate.
    Vec3 ray(const Vec2& pixel) const;
    /// Camera-frame point -> pixel. Caller guarantees Z != 0.
    Vec2 project(const Vec3& point) const;

    static CameraIntrinsics identity() { return {1.0, 1.0, 0.0, 0.0}; }

private:
    double fx_, fy_, cx_, cy_;
};

struct Pose {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    static Pose identity() { return {}; }

    Vec3 apply(const Vec3& x) const { return R * x + t; }
    Pose inverse() const;
    /// Composition: (a * b).apply(x) == a.apply(b.apply(x)).
    friend Pose operator*(const Pose& a, const Pose& b);
};

/// True when R is orthonormal with determinant +1 within tol.
bool is_rotation(const Mat3& R, double tol = 1e-9);

/// Angle of the rotation R in radians.
double rotation_angle(const Mat3& R);

/// Rotation about a unit axis by angle (radians).
Mat3 axis_angle(const Vec3& axis, double angle);

Mat3 skew(const Vec3& v);

/// Angle between two (not necessarily unit) directions, radians.
double angle_between(const Vec3& a, const Vec3& b);

struct PlaneEstimate {
    Vec3 n = Vec3::UnitY();
    double h = 1.0;

    bool valid(double tol = 1e-9) const;
};

enum class HomographyKind { Projective, Euclidean };

/// 3x3 homography kept in canonical form: unit Frobenius norm and a
/// positive (2,2) entry, or the first nonzero entry positive when (2,2) is 0.
class Homography {
public:
    /// Canonicalizes M. Throws DegenerateGeometry when M is singular.
    Homography(const Mat3& M, HomographyKind kind);

    const Mat3& matrix() const { return M_; }
    HomographyKind kind() const { return kind_; }
    Homography inverse() const;

    /// Frobenius distance between canonical representatives.
    double distance(const Homography& other) const { return (M_ - other.M_).norm(); }

private:
    Mat3 M_;
    HomographyKind kind_;
};

/// Canonical representative of a 3x3 matrix up to scale.
Mat3 canonical(const Mat3& M);

struct Correspondence {
    Vec2 x1;
    Vec2 x2;
};

using Point3 = Vec3;

/// H = K (R + t n^T / h) K^-1. With K = identity the result is Euclidean.
Homography homography_from_motion_plane(const Pose& pose, const PlaneEstimate& plane,
                                        const CameraIntrinsics& K);

/// Dehomogenized H * (x, 1). Throws PointAtInfinity when the mapped point is
/// at infinity.
Vec2 apply_homography(const Homography& H, const Vec2& x);

/// K^-1 H K for a projective H.
Homography euclidean_from_projective(const Homography& H, const CameraIntrinsics& K);

/// Linear (DLT) triangulation in frame-1 coordinates.
/// Throws LowParallax when baseline / depth < kMinParallaxRatio.
Point3 triangulate_two_view(const Correspondence& c, const Pose& pose, const CameraIntrinsics& K);

inline constexpr double kMinParallaxRatio = 1e-3;

/// Plane expressed in frame 2 after the motion: n' = R n, h' = h + n'^T t.
/// Throws InvalidPlane when the camera crossed the plane (h' <= 0).
PlaneEstimate transform_plane(const PlaneEstimate& plane, const Pose& pose);

}  // namespace scalevo

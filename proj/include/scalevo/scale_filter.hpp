#pragma once

// Kalman smoothing of the ground plane x = (n_x, n_y, n_z, h) across frames
// and the gates deciding which per-frame estimates reach the filter.

#include "scalevo/geometry.hpp"

#include <Eigen/Core>

#include <string_view>

namespace scalevo {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

struct FilterNoise {
    Vec4 q{1e-6, 1e-6, 1e-6, 1e-4};     ///< process noise diagonal
    Vec3 r{1e-4, 1e-4, 1e-2};           ///< measurement noise diagonal (n_x, n_z, h)
    Vec4 p0{1e-4, 1e-4, 1e-4, 1e-2};    ///< initial covariance diagonal

    /// Throws Config unless every entry is finite and >= 0 (r strictly > 0).
    void validate() const;
};

struct KalmanState {
    Vec4 x = Vec4(0.0, 1.0, 0.0, 1.0);
    Mat4 P = Mat4::Identity();
    Mat4 Q = Mat4::Zero();
    Mat3 Rm = Mat3::Identity();

    static KalmanState initial(const PlaneEstimate& plane, const FilterNoise& noise = {});

    PlaneEstimate plane() const { return {x.head<3>(), x(3)}; }
    Vec3 observation() const { return {x(0), x(2), x(3)}; }
};

/// Propagates the plane through the frame motion (n' = R n,
/// h' = h + n'^T t) and the covariance through its Jacobian.
KalmanState kf_predict(const KalmanState& state, const Pose& pose);

/// Update with z = (n_x, n_z, h). n_y is recovered from the unit
/// constraint keeping the prior sign. Joseph form keeps P symmetric PSD.
KalmanState kf_update(const KalmanState& state, const Vec3& z);

/// Rescales the h component for a change of map units by factor s.
KalmanState kf_rescale_height(const KalmanState& state, double s);

struct GateConfig {
    double max_normal_angle_deg = 5.0;
    double min_speed = 0.1;  ///< translation norm per frame

    void validate() const;
};

enum class GateReason { Accepted, NormalAngle, Speed, NormalAngleAndSpeed };

std::string_view to_string(GateReason reason);

struct GateDecision {
    GateReason reason = GateReason::Accepted;
    double normal_angle_deg = 0.0;

    bool accepted() const { return reason == GateReason::Accepted; }
};

GateDecision gate_plane_estimate(const PlaneEstimate& plane, const Vec3& prior_n, double speed,
                                 const GateConfig& cfg);

}  // namespace scalevo

#include "scalevo/scale_filter.hpp"

#include "scalevo/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

namespace scalevo {
namespace {

bool all_finite_nonneg(const auto& v) {
    for (int i = 0; i < v.size(); ++i)
        if (!std::isfinite(v(i)) || v(i) < 0.0) return false;
    return true;
}

// Observation selects (n_x, n_z, h).
Eigen::Matrix<double, 3, 4> observation_matrix() {
    Eigen::Matrix<double, 3, 4> H = Eigen::Matrix<double, 3, 4>::Zero();
    H(0, 0) = 1.0;
    H(1, 2) = 1.0;
    H(2, 3) = 1.0;
    return H;
}

void renormalize(Vec4& x) {
    const double norm = x.head<3>().norm();
    if (norm > 0.0) x.head<3>() /= norm;
}

}  // namespace

void FilterNoise::validate() const {
    if (!all_finite_nonneg(q) || !all_finite_nonneg(p0) || !all_finite_nonneg(r) ||
        (r.array() <= 0.0).any()) {
        throw Error(ErrorKind::Config, "filter noise must be finite and nonnegative, r positive");
    }
}

KalmanState KalmanState::initial(const PlaneEstimate& plane, const FilterNoise& noise) {
    noise.validate();
    if (!plane.valid(1e-6)) {
        throw Error(ErrorKind::InvalidInput, "filter initialized from an invalid plane");
    }
    KalmanState s;
    s.x << plane.n.normalized(), plane.h;
    s.P = noise.p0.asDiagonal();
    s.Q = noise.q.asDiagonal();
    s.Rm = noise.r.asDiagonal();
    return s;
}

KalmanState kf_predict(const KalmanState& state, const Pose& pose) {
    Mat4 F = Mat4::Zero();
    F.topLeftCorner<3, 3>() = pose.R;
    F.block<1, 3>(3, 0) = (pose.R.transpose() * pose.t).transpose();
    F(3, 3) = 1.0;

    KalmanState out = state;
    out.x = F * state.x;
    renormalize(out.x);
    out.P = F * state.P * F.transpose() + state.Q;
    out.P = 0.5 * (out.P + out.P.transpose());
    return out;
}

KalmanState kf_update(const KalmanState& state, const Vec3& z) {
    if (!z.allFinite()) {
        throw Error(ErrorKind::InvalidInput, "measurement must be finite");
    }
    const auto H = observation_matrix();
    const Mat3 S = H * state.P * H.transpose() + state.Rm;
    Eigen::LDLT<Mat3> ldlt(S);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-15 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
        throw Error(ErrorKind::FilterDegenerate, "innovation covariance is singular");
    }
    // K = P H^T S^-1, computed as (S^-1 H P)^T since S and P are symmetric.
    const Eigen::Matrix<double, 4, 3> K = ldlt.solve(H * state.P).transpose();
    const Vec3 innovation = z - H * state.x;

    KalmanState out = state;
    out.x = state.x + K * innovation;
    const Mat4 IKH = Mat4::Identity() - K * H;
    out.P = IKH * state.P * IKH.transpose() + K * state.Rm * K.transpose();
    out.P = 0.5 * (out.P + out.P.transpose());

    const double sign = state.x(1) < 0.0 ? -1.0 : 1.0;
    const double planar = out.x(0) * out.x(0) + out.x(2) * out.x(2);
    if (planar < 1.0) {
        out.x(1) = sign * std::sqrt(1.0 - planar);
    } else {
        out.x(1) = 0.0;
    }
    renormalize(out.x);
    return out;
}

KalmanState kf_rescale_height(const KalmanState& state, double s) {
    if (!(s > 0.0) || !std::isfinite(s)) {
        throw Error(ErrorKind::InvalidInput, "height rescale factor must be positive");
    }
    const Vec4 d(1.0, 1.0, 1.0, s);
    KalmanState out = state;
    out.x(3) *= s;
    out.P = d.asDiagonal() * state.P * d.asDiagonal();
    return out;
}

void GateConfig::validate() const {
    if (!(max_normal_angle_deg > 0.0) || !(min_speed >= 0.0)) {
        throw Error(ErrorKind::Config, "gate requires max_normal_angle > 0 and min_speed >= 0");
    }
}

std::string_view to_string(GateReason reason) {
    switch (reason) {
        case GateReason::Accepted: return "accepted";
        case GateReason::NormalAngle: return "normal_angle";
        case GateReason::Speed: return "speed";
        case GateReason::NormalAngleAndSpeed: return "normal_angle+speed";
    }
    return "unknown";
}

GateDecision gate_plane_estimate(const PlaneEstimate& plane, const Vec3& prior_n, double speed,
                                 const GateConfig& cfg) {
    GateDecision d;
    d.normal_angle_deg = angle_between(plane.n, prior_n) * 180.0 / std::numbers::pi;
    const bool normal_ok = d.normal_angle_deg <= cfg.max_normal_angle_deg;
    const bool speed_ok = speed >= cfg.min_speed;
    if (!normal_ok && !speed_ok) {
        d.reason = GateReason::NormalAngleAndSpeed;
    } else if (!normal_ok) {
        d.reason = GateReason::NormalAngle;
    } else if (!speed_ok) {
        d.reason = GateReason::Speed;
    }
    return d;
}

}  // namespace scalevo

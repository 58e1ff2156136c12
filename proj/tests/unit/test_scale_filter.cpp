#include "scalevo/errors.hpp"
#include "scalevo/scale_filter.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

using namespace scalevo;

namespace {

double min_eigenvalue(const Mat4& P) {
    return Eigen::SelfAdjointEigenSolver<Mat4>(P).eigenvalues().minCoeff();
}

}  // namespace

TEST(FilterNoise, Validation) {
    FilterNoise ok;
    EXPECT_NO_THROW(ok.validate());
    FilterNoise bad_r;
    bad_r.r(1) = 0.0;
    EXPECT_THROW(bad_r.validate(), Error);
    FilterNoise bad_q;
    bad_q.q(0) = -1.0;
    EXPECT_THROW(bad_q.validate(), Error);
}

TEST(KalmanPredict, IdentityMotionKeepsState) {
    const auto s0 = KalmanState::initial({Vec3::UnitY(), 1.7});
    const auto s1 = kf_predict(s0, Pose::identity());
    EXPECT_LT((s1.x - s0.x).norm(), 1e-15);
    EXPECT_LT((s1.P - (s0.P + s0.Q)).norm(), 1e-18);
}

TEST(KalmanPredict, InPlaneTranslationKeepsHeight) {
    const auto s0 = KalmanState::initial({Vec3::UnitY(), 1.7});
    const auto s1 = kf_predict(s0, {Mat3::Identity(), Vec3(0.3, 0.0, -1.2)});
    EXPECT_NEAR(s1.x(3), 1.7, 1e-15);
    EXPECT_LT((s1.x.head<3>() - Vec3::UnitY()).norm(), 1e-15);
}

TEST(KalmanPredict, MatchesPlaneTransform) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const PlaneEstimate pl{(Vec3::UnitY() + 0.1 * test::random_unit(rng)).normalized(), 1.7};
        const Pose p{test::random_rotation(rng, 0.05), 0.5 * test::random_unit(rng)};
        const auto expected = transform_plane(pl, p);
        const auto got = kf_predict(KalmanState::initial(pl), p).plane();
        EXPECT_LT((got.n - expected.n).norm(), 1e-9);
        EXPECT_NEAR(got.h, expected.h, 1e-9);
    }
}

TEST(KalmanPredict, CovarianceFollowsJacobian) {
    // Finite-difference Jacobian of the transition, independent of the filter.
    const Pose p{axis_angle(Vec3(0.2, 1, 0.1).normalized(), 0.03), Vec3(0.1, 0.05, -1.0)};
    const Vec4 x0(0.02, 0.999, -0.03, 1.7);
    auto f = [&](const Vec4& x) {
        const Vec3 n = p.R * x.head<3>();
        return Vec4(n.x(), n.y(), n.z(), x(3) + n.dot(p.t));
    };
    Mat4 F;
    for (int j = 0; j < 4; ++j) {
        Vec4 dx = Vec4::Zero();
        dx(j) = 1e-6;
        F.col(j) = (f(x0 + dx) - f(x0 - dx)) / 2e-6;
    }
    KalmanState s;
    s.x = x0;
    s.P = Vec4(1e-4, 2e-4, 3e-4, 1e-2).asDiagonal();
    s.Q = Mat4::Zero();
    const auto out = kf_predict(s, p);
    EXPECT_LT((out.P - F * s.P * F.transpose()).norm(), 1e-9);
}

TEST(KalmanUpdate, TinyMeasurementNoiseTracksMeasurement) {
    FilterNoise noise;
    noise.r = Vec3::Constant(1e-14);
    const auto s0 = KalmanState::initial({Vec3::UnitY(), 1.7}, noise);
    const Vec3 n = Vec3(0.03, 1.0, -0.02).normalized();
    const auto s1 = kf_update(s0, {n.x(), n.z(), 1.6});
    EXPECT_NEAR(s1.x(0), n.x(), 1e-8);
    EXPECT_NEAR(s1.x(2), n.z(), 1e-8);
    EXPECT_NEAR(s1.x(3), 1.6, 1e-8);
    EXPECT_NEAR(s1.x(1), n.y(), 1e-8);
}

TEST(KalmanUpdate, ZeroInnovationKeepsMeanAndShrinksCovariance) {
    const auto s0 = KalmanState::initial({Vec3::UnitY(), 1.7});
    const auto s1 = kf_update(s0, s0.observation());
    EXPECT_LT((s1.x - s0.x).norm(), 1e-15);
    EXPECT_LT(s1.P.trace(), s0.P.trace());
}

TEST(KalmanUpdate, KeepsUnitNormalAndPriorSign) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 0.05);
    for (double sign : {1.0, -1.0}) {
        auto s = KalmanState::initial({sign * Vec3::UnitY(), 1.7});
        for (int i = 0; i < 50; ++i) {
            s = kf_update(s, {g(rng), g(rng), 1.7 + g(rng)});
            EXPECT_NEAR(s.x.head<3>().norm(), 1.0, 1e-12);
            EXPECT_GT(sign * s.x(1), 0.0);
        }
    }
}

TEST(KalmanUpdate, CovarianceStaysSymmetricPsd) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.01);
    auto s = KalmanState::initial({Vec3::UnitY(), 1.7});
    for (int i = 0; i < 500; ++i) {
        s = kf_predict(s, {test::random_rotation(rng, 0.01), Vec3(0, 0, -1.0)});
        s = kf_update(s, {g(rng), g(rng), 1.7 + 10.0 * g(rng)});
        ASSERT_LT((s.P - s.P.transpose()).norm(), 1e-18);
        ASSERT_GE(min_eigenvalue(s.P), -1e-15);
    }
}

TEST(KalmanUpdate, TraceNonIncreasingWithoutProcessNoise) {
    FilterNoise noise;
    noise.q = Vec4::Zero();
    auto s = KalmanState::initial({Vec3::UnitY(), 1.7}, noise);
    double prev = s.P.trace();
    for (int i = 0; i < 100; ++i) {
        s = kf_update(kf_predict(s, Pose::identity()), {0.001, -0.002, 1.69});
        EXPECT_LE(s.P.trace(), prev + 1e-18);
        prev = s.P.trace();
    }
}

TEST(KalmanUpdate, RejectsNonFiniteMeasurement) {
    const auto s = KalmanState::initial({Vec3::UnitY(), 1.7});
    EXPECT_THROW(kf_update(s, {0.0, std::nan(""), 1.7}), Error);
}

TEST(KalmanUpdate, SingularInnovationIsDegenerate) {
    FilterNoise noise;
    noise.p0 = Vec4::Zero();
    noise.r = Vec3::Constant(1e-300);
    const auto s = KalmanState::initial({Vec3::UnitY(), 1.7}, noise);
    try {
        kf_update(s, {0.0, 0.0, 1.7});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::FilterDegenerate);
    }
}

TEST(KalmanRescale, ScalesHeightAndItsCovariance) {
    auto s = KalmanState::initial({Vec3::UnitY(), 1.7});
    s.P(0, 3) = s.P(3, 0) = 1e-5;
    const auto r = kf_rescale_height(s, 2.0);
    EXPECT_DOUBLE_EQ(r.x(3), 3.4);
    EXPECT_DOUBLE_EQ(r.P(3, 3), 4.0 * s.P(3, 3));
    EXPECT_DOUBLE_EQ(r.P(0, 3), 2.0 * s.P(0, 3));
    EXPECT_DOUBLE_EQ(r.P(0, 0), s.P(0, 0));
    EXPECT_THROW(kf_rescale_height(s, 0.0), Error);
}

TEST(GatePlaneEstimate, Examples) {
    const GateConfig cfg;
    const Vec3 tilt6 = axis_angle(Vec3::UnitX(), 6.0 * M_PI / 180.0) * Vec3::UnitY();
    const Vec3 tilt4 = axis_angle(Vec3::UnitX(), 4.0 * M_PI / 180.0) * Vec3::UnitY();
    EXPECT_EQ(gate_plane_estimate({tilt6, 1.7}, Vec3::UnitY(), 1.0, cfg).reason,
              GateReason::NormalAngle);
    EXPECT_NEAR(gate_plane_estimate({tilt6, 1.7}, Vec3::UnitY(), 1.0, cfg).normal_angle_deg, 6.0,
                1e-9);
    EXPECT_TRUE(gate_plane_estimate({tilt4, 1.7}, Vec3::UnitY(), 1.0, cfg).accepted());
    EXPECT_EQ(gate_plane_estimate({Vec3::UnitY(), 1.7}, Vec3::UnitY(), 0.0, cfg).reason,
              GateReason::Speed);
    EXPECT_EQ(gate_plane_estimate({tilt6, 1.7}, Vec3::UnitY(), 0.05, cfg).reason,
              GateReason::NormalAngleAndSpeed);
    EXPECT_TRUE(gate_plane_estimate({Vec3::UnitY(), 1.7}, Vec3::UnitY(), 0.1, cfg).accepted());
}

TEST(GateConfig, Validation) {
    EXPECT_THROW((GateConfig{0.0, 0.1}.validate()), Error);
    EXPECT_THROW((GateConfig{5.0, -1.0}.validate()), Error);
}

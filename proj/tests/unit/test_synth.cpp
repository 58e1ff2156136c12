#include "scalevo/errors.hpp"
#include "scalevo/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace scalevo;

namespace {

bool in_image(const SynthConfig& c, const Vec2& x) {
    return x.x() >= 0.0 && x.x() < c.image_width && x.y() >= 0.0 && x.y() < c.image_height;
}

}  // namespace

TEST(SynthConfig, Speeds) {
    SynthConfig c;
    EXPECT_NEAR(c.speed(), 12.5 / 3.6 / 10.0, 1e-12);
    EXPECT_NEAR(c.speed(), 0.347, 5e-4);
    c.speed_mode = SpeedMode::High;
    EXPECT_NEAR(c.speed(), 50.0 / 3.6 / 10.0, 1e-12);
    c.speed_mode = SpeedMode::Explicit;
    c.explicit_speed = 0.7;
    EXPECT_DOUBLE_EQ(c.speed(), 0.7);
}

TEST(SynthConfig, Validation) {
    SynthConfig c;
    c.noise_sigma = -1.0;
    EXPECT_THROW(c.validate(), Error);
    SynthConfig d;
    d.roi.x0 = 0.8;
    EXPECT_THROW(d.validate(), Error);
}

TEST(DeriveSeed, DistinctStreams) {
    EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
    EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

TEST(VehicleMotion, StepLengthYawAndPlane) {
    SynthConfig c;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const Pose p = sample_vehicle_motion(c, rng);
        EXPECT_NEAR(p.t.norm(), c.speed(), 1e-12);
        EXPECT_LE(rotation_angle(p.R), c.max_yaw_deg * M_PI / 180.0 + 1e-12);
        EXPECT_LT((p.R * Vec3::UnitY() - Vec3::UnitY()).norm(), 1e-12);
        EXPECT_LT(p.t.z(), 0.0);  // forward motion moves scene points closer
    }
}

TEST(GenerateFramePair, NoiselessPointsSatisfyHomography) {
    SynthConfig c;
    std::mt19937_64 rng(2);
    const auto pair = generate_frame_pair(c, sample_vehicle_motion(c, rng));
    ASSERT_EQ(pair.corrs_roi.size(), c.n_points);
    EXPECT_EQ(pair.corrs_all.size(), c.n_points + c.n_scene_points);
    for (const auto& m : pair.corrs_roi) {
        EXPECT_LT((apply_homography(pair.H_gt, m.x1) - m.x2).norm(), 1e-9);
        EXPECT_TRUE(in_image(c, m.x1));
        EXPECT_TRUE(in_image(c, m.x2));
        const double u = m.x1.x() / c.image_width, v = m.x1.y() / c.image_height;
        EXPECT_GE(u, c.roi.x0);
        EXPECT_LE(u, c.roi.x1);
        EXPECT_GE(v, c.roi.y0);
        EXPECT_LE(v, c.roi.y1);
    }
    // Independent check of H_gt from its definition.
    const Mat3 H = c.K.matrix() *
                   (pair.pose_gt.R + pair.pose_gt.t * c.n_true.transpose() / c.h_true) *
                   c.K.inverse();
    EXPECT_LT((canonical(H) - pair.H_gt.matrix()).norm(), 1e-12);
}

TEST(GenerateFramePair, NoiseHasRequestedSpread) {
    SynthConfig c;
    c.noise_sigma = 1.0;
    std::mt19937_64 rng(3);
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (int k = 0; k < 100; ++k) {
        c.seed = derive_seed(77, static_cast<std::uint64_t>(k));
        const auto pair = generate_frame_pair(c, sample_vehicle_motion(c, rng));
        for (const auto& m : pair.corrs_roi) {
            const Vec2 d = m.x2 - apply_homography(pair.H_gt, m.x1);
            for (double e : {d.x(), d.y()}) {
                sum += e;
                sum_sq += e * e;
                ++n;
            }
        }
    }
    ASSERT_GE(n, 10000u);
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(sum_sq / static_cast<double>(n) - mean * mean);
    EXPECT_GE(sd, 0.97);
    EXPECT_LE(sd, 1.03);
}

TEST(GenerateFramePair, DeterministicInSeed) {
    SynthConfig c;
    c.noise_sigma = 0.5;
    std::mt19937_64 rng(4);
    const Pose p = sample_vehicle_motion(c, rng);
    const auto a = generate_frame_pair(c, p);
    const auto b = generate_frame_pair(c, p);
    ASSERT_EQ(a.corrs_all.size(), b.corrs_all.size());
    for (std::size_t i = 0; i < a.corrs_all.size(); ++i) {
        EXPECT_EQ(a.corrs_all[i].x1, b.corrs_all[i].x1);
        EXPECT_EQ(a.corrs_all[i].x2, b.corrs_all[i].x2);
    }
    c.seed = 2;
    EXPECT_NE(generate_frame_pair(c, p).corrs_roi[0].x1, a.corrs_roi[0].x1);
}

TEST(GenerateFramePair, GroundTruthHomographyDecomposesBack) {
    SynthConfig c;
    c.speed_mode = SpeedMode::High;
    std::mt19937_64 rng(5);
    const auto pair = generate_frame_pair(c, sample_vehicle_motion(c, rng));
    const auto cands = decompose_homography(euclidean_from_projective(pair.H_gt, c.K));
    bool found = false;
    for (const auto& cand : cands)
        found |= (cand.n - c.n_true).norm() < 1e-6 &&
                 (cand.t_over_h - pair.pose_gt.t / c.h_true).norm() < 1e-6;
    EXPECT_TRUE(found);
}

TEST(NoiseSweep, NoiselessCellsAreExact) {
    SweepConfig cfg;
    cfg.sigmas = {0.0};
    cfg.trials = 5;
    cfg.threads = 2;
    const auto rows = run_noise_sweep(cfg);
    ASSERT_EQ(rows.size(), 6u);
    for (const auto& r : rows) {
        EXPECT_EQ(r.failures, 0);
        EXPECT_LT(r.mean_rel_err, 1e-6) << to_string(r.method);
    }
    EXPECT_EQ(rows[0].method, ScaleMethod::Triangulation);
    EXPECT_EQ(rows[1].method, ScaleMethod::Decomposition);
    EXPECT_EQ(rows[2].method, ScaleMethod::SparseOptimization);
    EXPECT_EQ(rows[3].speed, SpeedMode::High);
}

TEST(NoiseSweep, IndependentOfThreadCount) {
    SweepConfig cfg;
    cfg.sigmas = {1.0};
    cfg.speeds = {SpeedMode::Low};
    cfg.trials = 6;
    cfg.threads = 1;
    const auto a = run_noise_sweep(cfg);
    cfg.threads = 3;
    const auto b = run_noise_sweep(cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].mean_rel_err, b[i].mean_rel_err);
        EXPECT_EQ(a[i].std_rel_err, b[i].std_rel_err);
    }
    std::ostringstream os;
    write_sweep_csv(os, a);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
              "sigma,speed,method,mean_rel_err,std_rel_err,trials,failures");
}

TEST(DriftingTrajectory, CumulativeScale) {
    SynthConfig c;
    c.n_points = 8;
    c.n_scene_points = 8;
    const auto traj = simulate_drifting_trajectory(1000, 1.001, c);
    ASSERT_EQ(traj.ground_truth.size(), 1001u);
    ASSERT_EQ(traj.vo.size(), 1001u);
    EXPECT_NEAR(traj.true_scale.back(), std::pow(1.001, 1000), 1e-9);
    EXPECT_NEAR(traj.true_scale.back(), 2.717, 1e-3);
    EXPECT_TRUE(traj.pairs[0].corrs_all.empty());
    for (std::size_t k : {1u, 500u, 1000u}) {
        const double gt = (traj.ground_truth[k].t - traj.ground_truth[k - 1].t).norm();
        const double vo = (traj.vo[k].t - traj.vo[k - 1].t).norm();
        EXPECT_NEAR(gt / vo, traj.true_scale[k], 1e-9);
        EXPECT_NEAR(traj.pairs[k].pose_gt.t.norm(), gt, 1e-12);
    }
}

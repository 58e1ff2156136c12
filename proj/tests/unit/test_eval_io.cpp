#include "scalevo/errors.hpp"
#include "scalevo/eval_io.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <Eigen/Geometry>
#include <cmath>
#include <cstdlib>
#include <sstream>

using namespace scalevo;

namespace {

Trajectory random_drive(std::mt19937_64& rng, std::size_t n) {
    // Irregular step lengths keep arc lengths off the segment boundaries.
    std::uniform_real_distribution<double> len(0.8, 1.3);
    Trajectory t;
    t.poses.push_back(Pose::identity());
    for (std::size_t k = 1; k < n; ++k) {
        const Pose step{test::random_rotation(rng, 0.02), Vec3(0.0, 0.0, len(rng))};
        const Pose& prev = t.poses.back();
        t.poses.push_back({prev.R * step.R, prev.t + prev.R * step.t});
    }
    return t;
}

Trajectory perturb(const Trajectory& gt, std::mt19937_64& rng, double scale) {
    Trajectory est;
    for (const auto& p : gt.poses)
        est.poses.push_back({p.R * test::random_rotation(rng, 0.01),
                             scale * p.t + 0.05 * test::random_unit(rng)});
    return est;
}

// Brute-force segment errors on Eigen isometries, written from the metric's
// definition without the library's Pose type.
struct OracleSegments {
    std::size_t count = 0;
    double t_sum = 0.0, r_sum = 0.0;
};

OracleSegments oracle_segments(const Trajectory& est, const Trajectory& gt, double length) {
    auto iso = [](const Pose& p) {
        Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
        T.linear() = p.R;
        T.translation() = p.t;
        return T;
    };
    OracleSegments out;
    for (std::size_t a = 0; a < gt.size(); ++a) {
        double dist = 0.0;
        for (std::size_t b = a + 1; b < gt.size(); ++b) {
            dist += (gt.poses[b].t - gt.poses[b - 1].t).norm();
            if (dist < length) continue;
            const Eigen::Isometry3d dg = iso(gt.poses[a]).inverse() * iso(gt.poses[b]);
            const Eigen::Isometry3d de = iso(est.poses[a]).inverse() * iso(est.poses[b]);
            const Eigen::Isometry3d err = dg.inverse() * de;
            const double angle = Eigen::AngleAxisd(err.linear()).angle() * 180.0 / M_PI;
            out.t_sum += err.translation().norm() / dist * 100.0;
            out.r_sum += angle / dist;
            ++out.count;
            break;
        }
    }
    return out;
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorKind::InvalidInput;
}

}  // namespace

TEST(KittiPoses, ParsesIdentityLine) {
    std::istringstream in("1 0 0 0 0 1 0 0 0 0 1 0\n\n1 0 0 2.5 0 1 0 0 0 0 1 -1\n");
    const auto t = parse_kitti_poses(in);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t.poses[0].R, Mat3::Identity());
    EXPECT_EQ(t.poses[1].t, Vec3(2.5, 0.0, -1.0));
}

TEST(KittiPoses, ElevenFieldsNameTheLine) {
    std::istringstream in("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1\n");
    try {
        parse_kitti_poses(in, "poses.txt");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Parse);
        EXPECT_NE(std::string(e.what()).find("poses.txt:2"), std::string::npos) << e.what();
    }
}

TEST(KittiPoses, RejectsNonRotation) {
    std::istringstream in("2 0 0 0 0 1 0 0 0 0 1 0\n");
    EXPECT_EQ(kind_of([&] { parse_kitti_poses(in); }), ErrorKind::Parse);
    std::istringstream junk("1 0 0 0 0 1 0 x 0 0 1 0\n");
    EXPECT_EQ(kind_of([&] { parse_kitti_poses(junk); }), ErrorKind::Parse);
}

TEST(KittiPoses, Roundtrip) {
    std::mt19937_64 rng(1);
    const auto t = random_drive(rng, 50);
    std::stringstream ss;
    write_kitti_poses(ss, t);
    const auto back = parse_kitti_poses(ss);
    ASSERT_EQ(back.size(), t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        EXPECT_LT((back.poses[k].R - t.poses[k].R).norm(), 1e-8);
        EXPECT_LT((back.poses[k].t - t.poses[k].t).norm(), 1e-7 * std::max(1.0, t.poses[k].t.norm()));
    }
}

TEST(GroundTruthScales, Examples) {
    Trajectory t;
    t.poses = {Pose::identity(), Pose::identity(), {Mat3::Identity(), Vec3(0, 1.2, 0.5)}};
    const auto s = ground_truth_scales(t);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0], 0.0);
    EXPECT_DOUBLE_EQ(s[1], 1.3);
}

TEST(GroundTruthScales, InvariantToWorldTransform) {
    std::mt19937_64 rng(2);
    const auto t = random_drive(rng, 30);
    const Pose world{test::random_rotation(rng, M_PI), Vec3(5, -3, 2)};
    Trajectory moved;
    for (const auto& p : t.poses) moved.poses.push_back(world * p);
    const auto a = ground_truth_scales(t), b = ground_truth_scales(moved);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(ScaleErrorStats, Examples) {
    const std::vector<double> gt{1.0, 2.0, 4.0, 0.0};
    const std::vector<std::optional<double>> est{1.1, std::nullopt, 4.4, 1.0};
    const auto st = scale_error_stats(est, gt);
    EXPECT_EQ(st.used, 2u);
    EXPECT_EQ(st.skipped, 2u);
    EXPECT_NEAR(st.mean, 0.1, 1e-12);
    EXPECT_NEAR(st.median, 0.1, 1e-12);
    EXPECT_NEAR(st.stddev, 0.0, 1e-12);
    EXPECT_TRUE(std::isnan(st.rel_errors[1]));
    EXPECT_TRUE(std::isnan(st.rel_errors[3]));
    const std::vector<std::optional<double>> short_est{1.0};
    EXPECT_EQ(kind_of([&] { scale_error_stats(short_est, gt); }), ErrorKind::Alignment);
}

TEST(SegmentErrors, StraightLineScaledByTenPercent) {
    Trajectory gt, est;
    for (int k = 0; k <= 200; ++k) {
        gt.poses.push_back({Mat3::Identity(), Vec3(0, 0, k)});
        est.poses.push_back({Mat3::Identity(), Vec3(0, 0, 1.1 * k)});
    }
    const std::vector<double> lengths{100.0};
    const auto r = kitti_segment_errors(est, gt, lengths);
    EXPECT_EQ(r.count, 101u);
    EXPECT_NEAR(r.t_err_pct, 10.0, 1e-9);
    EXPECT_NEAR(r.r_err_deg_per_m, 0.0, 1e-12);
    EXPECT_EQ(r.per_length[0].count, 101u);
}

TEST(SegmentErrors, IdenticalTrajectoriesHaveZeroError) {
    std::mt19937_64 rng(3);
    const auto gt = random_drive(rng, 150);
    const auto r = kitti_segment_errors(gt, gt, std::vector<double>{50.0, 100.0});
    EXPECT_NEAR(r.t_err_pct, 0.0, 1e-9);
    EXPECT_NEAR(r.r_err_deg_per_m, 0.0, 1e-7);
}

TEST(SegmentErrors, MatchBruteForce) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto gt = random_drive(rng, 120);
        const auto est = perturb(gt, rng, 1.05);
        const std::vector<double> lengths{20.0, 50.0, 100.0, 500.0};
        const auto r = kitti_segment_errors(est, gt, lengths);
        std::size_t total = 0;
        double t_sum = 0.0;
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            const auto o = oracle_segments(est, gt, lengths[i]);
            ASSERT_EQ(r.per_length[i].count, o.count);
            total += o.count;
            t_sum += o.t_sum;
            if (o.count == 0) continue;
            EXPECT_NEAR(r.per_length[i].t_err_pct, o.t_sum / o.count, 1e-9);
            EXPECT_NEAR(r.per_length[i].r_err_deg_per_m, o.r_sum / o.count, 1e-9);
        }
        EXPECT_EQ(r.count, total);
        EXPECT_NEAR(r.t_err_pct, t_sum / total, 1e-9);
    }
}

TEST(SegmentErrors, RejectsMismatchedLengths) {
    std::mt19937_64 rng(5);
    const auto gt = random_drive(rng, 10);
    const auto est = random_drive(rng, 9);
    EXPECT_EQ(kind_of([&] { kitti_segment_errors(est, gt, kKittiSegmentLengths); }),
              ErrorKind::Alignment);
}

TEST(CorrespondencesCsv, Roundtrip) {
    std::vector<FrameCorrespondences> frames(2);
    frames[0].frame = 1;
    frames[0].roi = {{{1.5, 2.25}, {3.125, 4.0}}};
    frames[0].all = {frames[0].roi[0], {{10.0, 20.0}, {30.0, 40.0}}};
    frames[1].frame = 2;
    frames[1].all = {{{0.1, 0.2}, {0.3, 0.4}}};
    std::stringstream ss;
    write_correspondences_csv(ss, frames);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "frame,x1,y1,x2,y2,roi");
    const auto back = parse_correspondences_csv(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].all.size(), 2u);
    ASSERT_EQ(back[0].roi.size(), 1u);
    EXPECT_EQ(back[0].roi[0].x2, Vec2(3.125, 4.0));
    EXPECT_TRUE(back[1].roi.empty());
}

TEST(CorrespondencesCsv, BadRowNamesTheLine) {
    std::istringstream in("frame,x1,y1,x2,y2,roi\n1,0,0,1,1,1\n1,0,0,1\n");
    try {
        parse_correspondences_csv(in, "c.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Parse);
        EXPECT_NE(std::string(e.what()).find("c.csv:3"), std::string::npos) << e.what();
    }
}

TEST(ScalesCsv, Roundtrip) {
    std::vector<FrameScale> scales(2);
    scales[0].frame = 1;
    ScaleEstimate e;
    e.s = 1.2345;
    e.plane = PlaneEstimate{Vec3(0.01, 0.9999, 0.0).normalized(), 1.377};
    scales[0].estimate = e;
    scales[1].frame = 2;
    std::stringstream ss;
    write_scales_csv(ss, scales);
    const auto back = parse_scales_csv(ss);
    ASSERT_EQ(back.size(), 2u);
    ASSERT_TRUE(back[0].estimate);
    EXPECT_NEAR(back[0].estimate->s, 1.2345, 1e-12);
    EXPECT_NEAR(back[0].estimate->plane->h, 1.377, 1e-12);
    EXPECT_FALSE(back[1].estimate);
}

TEST(Config, ParsesKeysAndComments) {
    std::istringstream in(
        "# camera\nfx = 700\nfy=700 # inline\ncx=600\ncy=180\n\nh_true=1.65\n"
        "max_normal_angle=4\ndrift_threshold=0.05\nlocal_window=5\nseed=9\nq_height=1e-3\n");
    const auto c = parse_config(in);
    EXPECT_EQ(c.fx, 700.0);
    EXPECT_EQ(c.h_true, 1.65);
    EXPECT_EQ(c.gate.max_normal_angle_deg, 4.0);
    EXPECT_EQ(c.correction().monitor.threshold, 0.05);
    EXPECT_EQ(c.correction().local_window, 5u);
    EXPECT_EQ(c.noise.q(3), 1e-3);
    if (!std::getenv("SCALEVO_SEED")) {
        EXPECT_EQ(c.seed, 9u);
        EXPECT_EQ(c.estimator.essential.seed, 9u);
        EXPECT_EQ(c.estimator.homography.seed, 10u);
    }
}

TEST(Config, UnknownKeyNamesTheLine) {
    std::istringstream in("fx=700\nbogus=1\n");
    try {
        parse_config(in, "app.cfg");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
        EXPECT_NE(std::string(e.what()).find("app.cfg:2"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
    }
    std::istringstream bad("fx=-1\n");
    EXPECT_EQ(kind_of([&] { parse_config(bad); }), ErrorKind::InvalidInput);
}

TEST(Config, SeedOverrideFromEnvironment) {
    const char* saved = std::getenv("SCALEVO_SEED");
    const std::string restore = saved ? saved : "";
    setenv("SCALEVO_SEED", "1234", 1);
    std::istringstream in("seed=9\n");
    const auto c = parse_config(in);
    EXPECT_EQ(c.seed, 1234u);
    EXPECT_EQ(c.estimator.homography.seed, 1235u);
    setenv("SCALEVO_SEED", "abc", 1);
    std::istringstream again("seed=9\n");
    EXPECT_EQ(kind_of([&] { parse_config(again); }), ErrorKind::Config);
    if (saved) setenv("SCALEVO_SEED", restore.c_str(), 1);
    else unsetenv("SCALEVO_SEED");
}

TEST(EvaluationReport, JsonShape) {
    Trajectory gt, est;
    for (int k = 0; k <= 20; ++k) {
        gt.poses.push_back({Mat3::Identity(), Vec3(0, 0, k)});
        est.poses.push_back({Mat3::Identity(), Vec3(0, 0, 1.1 * k)});
    }
    const auto seg = kitti_segment_errors(est, gt, std::vector<double>{10.0, 100.0});
    const std::vector<double> gts{1.0, 1.0};
    const std::vector<std::optional<double>> e{1.1, std::nullopt};
    const auto j = nlohmann::json::parse(
        evaluation_report_json(seg, scale_error_stats(e, gts), gt.size()));
    EXPECT_EQ(j["frames"], 21);
    EXPECT_NEAR(j["segments"]["t_err_pct"].get<double>(), 10.0, 1e-6);
    EXPECT_EQ(j["segments"]["per_length"][1]["count"], 0);
    EXPECT_NEAR(j["scale"]["mean_rel_err"].get<double>(), 0.1, 1e-9);
    EXPECT_TRUE(j["scale"]["per_frame"][1].is_null());
}

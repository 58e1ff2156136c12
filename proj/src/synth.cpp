#include "scalevo/synth.hpp"

#include "scalevo/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <thread>

namespace scalevo {
namespace {

constexpr int kMaxSamplingRounds = 200;

bool in_image(const Vec2& p, const SynthConfig& cfg) {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < cfg.image_width && p.y() < cfg.image_height;
}

struct TrialErrors {
    std::array<double, 3> err{};
    std::array<bool, 3> ok{};
};

TrialErrors run_trial(const SweepConfig& cfg, double sigma, SpeedMode speed, std::uint64_t seed) {
    SynthConfig sc = cfg.base;
    sc.noise_sigma = sigma;
    sc.speed_mode = speed;
    sc.seed = seed;
    std::mt19937_64 rng(derive_seed(seed, 0xface));
    const Pose motion = sample_vehicle_motion(sc, rng);
    const SynthFramePair pair = generate_frame_pair(sc, motion);
    const double s_true = motion.t.norm();

    EstimatorConfig est = cfg.estimator;
    est.homography.inlier_threshold =
        std::max(est.homography.inlier_threshold, cfg.threshold_sigma_factor * sigma);
    est.essential.seed = derive_seed(seed, 1);
    est.homography.seed = derive_seed(seed, 2);

    TrialErrors out;
    std::optional<FramePairGeometry> fitted;
    try {
        fitted = fit_frame_pair(pair.corrs_all, pair.corrs_roi, sc.K, est);
    } catch (const Error&) {
        return out;
    }
    const FramePairGeometry& geo = *fitted;
    auto record = [&](int m, auto&& estimate) {
        try {
            const ScaleEstimate e = estimate();
            if (std::isfinite(e.s) && e.s > 0.0) {
                out.err[static_cast<std::size_t>(m)] = std::abs(e.s - s_true) / s_true;
                out.ok[static_cast<std::size_t>(m)] = true;
            }
        } catch (const Error&) {
        }
    };
    record(0, [&] {
        return scale_by_triangulation(geo, pair.corrs_roi, sc.K, sc.h_true, sc.n_true, est);
    });
    record(1, [&] { return scale_by_decomposition(geo, sc.K, sc.h_true, sc.n_true); });
    record(2, [&] { return scale_by_sparse_optimization(geo, sc.K, sc.h_true, est); });
    return out;
}

constexpr std::array<ScaleMethod, 3> kMethods{ScaleMethod::Triangulation,
                                              ScaleMethod::Decomposition,
                                              ScaleMethod::SparseOptimization};

}  // namespace

std::string_view to_string(SpeedMode mode) {
    switch (mode) {
        case SpeedMode::Low: return "low";
        case SpeedMode::High: return "high";
        case SpeedMode::Explicit: return "explicit";
    }
    return "unknown";
}

double SynthConfig::speed() const {
    switch (speed_mode) {
        case SpeedMode::Low: return kLowSpeedKmh / 3.6 / frame_rate;
        case SpeedMode::High: return kHighSpeedKmh / 3.6 / frame_rate;
        case SpeedMode::Explicit: return explicit_speed;
    }
    return explicit_speed;
}

void SynthConfig::validate() const {
    const bool roi_ok = roi.x0 >= 0.0 && roi.y0 >= 0.0 && roi.x1 <= 1.0 && roi.y1 <= 1.0 &&
                        roi.x0 < roi.x1 && roi.y0 < roi.y1;
    if (!(noise_sigma >= 0.0) || !(scene_noise_sigma >= 0.0) || n_points < 4 || !roi_ok || !(h_true > 0.0) ||
        !(frame_rate > 0.0) || std::abs(n_true.norm() - 1.0) > 1e-9 || image_width <= 0 ||
        image_height <= 0 || !(speed() > 0.0) || !(scene_min_depth > 0.0) ||
        !(scene_max_depth > scene_min_depth)) {
        throw Error(ErrorKind::Config, "invalid synthetic configuration");
    }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // SplitMix64 finalizer applied to a chained mix of the inputs.
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ a) ^ b);
}

Pose sample_vehicle_motion(const SynthConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double yaw = unit(rng) * cfg.max_yaw_deg * std::numbers::pi / 180.0;
    const double d = cfg.speed();
    // Camera center of frame 2 in frame-1 coordinates: mostly along +z.
    Vec3 c(unit(rng) * cfg.max_lateral * d, 0.0, 0.0);
    c.z() = std::sqrt(d * d - c.x() * c.x());
    const Mat3 R = axis_angle(cfg.n_true, yaw);
    return {R, -R * c};
}

SynthFramePair generate_frame_pair(const SynthConfig& cfg, const Pose& pose_gt) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const CameraIntrinsics& K = cfg.K;

    SynthFramePair out;
    out.pose_gt = pose_gt;
    out.plane_gt = {cfg.n_true, cfg.h_true};
    out.H_gt = homography_from_motion_plane(pose_gt, out.plane_gt, K);

    auto perturb = [&](const Vec2& x, double sigma) {
        if (sigma == 0.0) return x;
        const double dx = noise(rng), dy = noise(rng);
        return Vec2(x.x() + sigma * dx, x.y() + sigma * dy);
    };

    const std::size_t max_attempts = cfg.n_points * kMaxSamplingRounds;
    for (std::size_t a = 0; a < max_attempts && out.corrs_roi.size() < cfg.n_points; ++a) {
        const Vec2 x1((cfg.roi.x0 + (cfg.roi.x1 - cfg.roi.x0) * u01(rng)) * cfg.image_width,
                      (cfg.roi.y0 + (cfg.roi.y1 - cfg.roi.y0) * u01(rng)) * cfg.image_height);
        const Vec3 r = K.ray(x1);
        const double proj = cfg.n_true.dot(r);
        if (!(proj > 0.0)) continue;  // ray does not meet the ground
        const Vec3 X2 = pose_gt.apply(r * (cfg.h_true / proj));
        if (X2.z() <= 0.0) continue;
        const Vec2 x2 = apply_homography(out.H_gt, x1);
        if (!in_image(x2, cfg)) continue;
        out.corrs_roi.push_back({x1, perturb(x2, cfg.noise_sigma)});
    }
    if (out.corrs_roi.size() < 4) {
        throw Error(ErrorKind::Config, "ROI does not see enough ground in both frames");
    }

    out.corrs_all = out.corrs_roi;
    const std::size_t scene_attempts = cfg.n_scene_points * kMaxSamplingRounds;
    std::size_t scene = 0;
    for (std::size_t a = 0; a < scene_attempts && scene < cfg.n_scene_points; ++a) {
        const Vec2 x1(u01(rng) * cfg.image_width, u01(rng) * cfg.image_height);
        const double depth =
            cfg.scene_min_depth + (cfg.scene_max_depth - cfg.scene_min_depth) * u01(rng);
        const Vec3 X1 = K.ray(x1) * depth;
        if (cfg.n_true.dot(X1) >= cfg.h_true) continue;  // below the ground
        const Vec3 X2 = pose_gt.apply(X1);
        if (X2.z() < 0.5) continue;
        const Vec2 x2 = K.project(X2);
        if (!in_image(x2, cfg)) continue;
        out.corrs_all.push_back({x1, perturb(x2, cfg.scene_noise_sigma)});
        ++scene;
    }
    return out;
}

void SweepConfig::validate() const {
    base.validate();
    if (sigmas.empty() || speeds.empty() || trials < 1 ||
        std::any_of(sigmas.begin(), sigmas.end(), [](double s) { return !(s >= 0.0); })) {
        throw Error(ErrorKind::Config, "invalid sweep grid");
    }
}

std::vector<SweepRow> run_noise_sweep(const SweepConfig& cfg) {
    cfg.validate();
    const std::size_t n_cells = cfg.sigmas.size() * cfg.speeds.size();
    std::vector<std::vector<TrialErrors>> results(n_cells);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t c = next++; c < n_cells; c = next++) {
            const double sigma = cfg.sigmas[c / cfg.speeds.size()];
            const SpeedMode speed = cfg.speeds[c % cfg.speeds.size()];
            auto& cell = results[c];
            cell.reserve(static_cast<std::size_t>(cfg.trials));
            for (int t = 0; t < cfg.trials; ++t)
                cell.push_back(run_trial(cfg, sigma, speed,
                                         derive_seed(cfg.seed, c, static_cast<std::uint64_t>(t))));
        }
    };
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_cells));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }

    std::vector<SweepRow> rows;
    for (std::size_t c = 0; c < n_cells; ++c) {
        for (std::size_t m = 0; m < kMethods.size(); ++m) {
            SweepRow row;
            row.sigma = cfg.sigmas[c / cfg.speeds.size()];
            row.speed = cfg.speeds[c % cfg.speeds.size()];
            row.method = kMethods[m];
            row.trials = cfg.trials;
            double sum = 0.0, sum_sq = 0.0;
            int ok = 0;
            for (const auto& trial : results[c]) {
                if (!trial.ok[m]) {
                    ++row.failures;
                    continue;
                }
                sum += trial.err[m];
                sum_sq += trial.err[m] * trial.err[m];
                ++ok;
            }
            if (ok > 0) {
                row.mean_rel_err = sum / ok;
                row.std_rel_err = std::sqrt(std::max(0.0, sum_sq / ok - row.mean_rel_err * row.mean_rel_err));
            } else {
                row.mean_rel_err = row.std_rel_err = std::numeric_limits<double>::quiet_NaN();
            }
            rows.push_back(row);
        }
    }
    return rows;
}

void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
    const auto flags = os.flags();
    const auto precision = os.precision(9);
    os << "sigma,speed,method,mean_rel_err,std_rel_err,trials,failures\n";
    for (const auto& r : rows) {
        os << r.sigma << ',' << to_string(r.speed) << ',' << to_string(r.method) << ','
           << r.mean_rel_err << ',' << r.std_rel_err << ',' << r.trials << ',' << r.failures
           << '\n';
    }
    os.precision(precision);
    os.flags(flags);
}

DriftingTrajectory simulate_drifting_trajectory(std::size_t length, double drift_per_frame,
                                                const SynthConfig& cfg) {
    if (!(drift_per_frame > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "drift per frame must be positive");
    }
    cfg.validate();
    DriftingTrajectory out;
    out.ground_truth.reserve(length + 1);
    out.vo.reserve(length + 1);
    out.ground_truth.push_back(Pose::identity());
    out.vo.push_back(Pose::identity());
    out.true_scale.push_back(1.0);
    out.pairs.emplace_back();

    std::mt19937_64 rng(derive_seed(cfg.seed, 0xd21f7));
    double cumulative = 1.0;
    for (std::size_t k = 1; k <= length; ++k) {
        cumulative *= drift_per_frame;
        const Pose motion = sample_vehicle_motion(cfg, rng);
        const Pose vo_motion{motion.R, motion.t / cumulative};
        out.ground_truth.push_back(out.ground_truth.back() * motion.inverse());
        out.vo.push_back(out.vo.back() * vo_motion.inverse());
        out.true_scale.push_back(cumulative);

        SynthConfig pair_cfg = cfg;
        pair_cfg.seed = derive_seed(cfg.seed, k);
        out.pairs.push_back(generate_frame_pair(pair_cfg, motion));
    }
    return out;
}

}  // namespace scalevo

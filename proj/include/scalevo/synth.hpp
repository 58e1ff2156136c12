#pragma once

// Synthetic ground-plane frame pairs, the noise sweep over the three
// estimators, and drifting trajectories for the correction loop.

#include "scalevo/geometry.hpp"
#include "scalevo/scale_estimators.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string_view>
#include <vector>

namespace scalevo {

/// Rectangle in normalized image coordinates, [0, 1]^2.
struct Roi {
    double x0 = 0.35, y0 = 0.6, x1 = 0.65, y1 = 0.95;
};

enum class SpeedMode { Low, High, Explicit };

std::string_view to_string(SpeedMode mode);

inline constexpr double kLowSpeedKmh = 12.5;
inline constexpr double kHighSpeedKmh = 50.0;

/// KITTI-like grayscale camera.
inline CameraIntrinsics kitti_like_intrinsics() { return {718.856, 718.856, 607.1928, 185.2157}; }

struct SynthConfig {
    Vec3 n_true = Vec3::UnitY();
    double h_true = 1.7;  ///< meters
    SpeedMode speed_mode = SpeedMode::Low;
    double explicit_speed = 1.0;  ///< meters per frame, Explicit mode only
    double noise_sigma = 0.0;     ///< pixels, on frame-2 ground features
    /// Pixels, on frame-2 off-plane features. The pose of the pair comes from
    /// these, so by default it is as accurate as the VO feeding the
    /// estimators would make it.
    double scene_noise_sigma = 0.0;
    std::size_t n_points = 100;   ///< ground correspondences in the ROI
    std::size_t n_scene_points = 300;  ///< off-plane correspondences
    double scene_min_depth = 5.0;
    double scene_max_depth = 60.0;
    double max_yaw_deg = 1.0;      ///< per-frame heading change bound
    double max_lateral = 0.02;     ///< lateral drift, fraction of the step
    Roi roi;
    double frame_rate = 10.0;  ///< Hz
    int image_width = 1241;
    int image_height = 376;
    CameraIntrinsics K = kitti_like_intrinsics();
    std::uint64_t seed = 1;

    /// Translation norm per frame in meters.
    double speed() const;
    void validate() const;
};

struct SynthFramePair {
    std::vector<Correspondence> corrs_roi;
    std::vector<Correspondence> corrs_all;  ///< includes the ROI correspondences
    Pose pose_gt;                           ///< metric translation
    PlaneEstimate plane_gt;                 ///< in frame 1
    Homography H_gt{Mat3::Identity(), HomographyKind::Projective};
};

/// Mixes a seed with stream indices into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Forward motion with a small heading change and lateral offset,
/// |t| = cfg.speed(). The plane normal along the yaw axis is preserved.
Pose sample_vehicle_motion(const SynthConfig& cfg, std::mt19937_64& rng);

/// Ground points sampled uniformly in the ROI of frame 1 and mapped through
/// H_gt, plus off-plane scene points projected through pose_gt. Gaussian
/// noise of cfg.noise_sigma is added to each frame-2 coordinate. Only
/// correspondences visible in both images are kept. Deterministic in
/// cfg.seed.
SynthFramePair generate_frame_pair(const SynthConfig& cfg, const Pose& pose_gt);

struct SweepConfig {
    std::vector<double> sigmas{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    std::vector<SpeedMode> speeds{SpeedMode::Low, SpeedMode::High};
    int trials = 200;
    std::uint64_t seed = 2024;
    SynthConfig base;
    EstimatorConfig estimator;
    /// The homography threshold follows the ground noise:
    /// max(default, factor * sigma).
    double threshold_sigma_factor = 3.0;
    unsigned threads = 0;  ///< 0 picks the hardware concurrency

    void validate() const;
};

struct SweepRow {
    double sigma = 0.0;
    SpeedMode speed = SpeedMode::Low;
    ScaleMethod method = ScaleMethod::SparseOptimization;
    double mean_rel_err = 0.0;
    double std_rel_err = 0.0;
    int trials = 0;
    int failures = 0;
};

/// One row per (sigma, speed, method) in grid order. Trial t of cell c uses
/// derive_seed(seed, c, t) so the table does not depend on scheduling.
std::vector<SweepRow> run_noise_sweep(const SweepConfig& cfg);

void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows);

struct DriftingTrajectory {
    std::vector<Pose> ground_truth;  ///< camera-to-world, metric
    std::vector<Pose> vo;            ///< camera-to-world, drifting units
    std::vector<double> true_scale;  ///< metric per VO unit for the step ending at frame k
    std::vector<SynthFramePair> pairs;  ///< pairs[k] spans frames (k-1, k); pairs[0] is empty
};

/// length frame steps (length + 1 poses). The VO step k is the ground-truth
/// step divided by drift^k, so the metric scale of the VO map grows by the
/// factor drift per frame.
DriftingTrajectory simulate_drifting_trajectory(std::size_t length, double drift_per_frame,
                                                const SynthConfig& cfg);

}  // namespace scalevo

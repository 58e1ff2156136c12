#pragma once

// File formats, ground-truth scale extraction and trajectory error metrics.

#include "scalevo/drift_correction.hpp"
#include "scalevo/geometry.hpp"
#include "scalevo/scale_estimators.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace scalevo {

/// Camera-to-world poses, one per frame, meters.
struct Trajectory {
    std::vector<Pose> poses;

    std::size_t size() const { return poses.size(); }
};

/// KITTI pose files carry about seven significant digits, so rotations are
/// checked loosely.
inline constexpr double kDefaultRotationTolerance = 1e-5;

/// 12 whitespace-separated floats per line, row-major [R|t]. Blank lines are
/// skipped. Throws Parse naming the source and line.
Trajectory parse_kitti_poses(std::istream& in, const std::string& source = "<stream>",
                             double rotation_tolerance = kDefaultRotationTolerance);
Trajectory read_kitti_poses(const std::filesystem::path& path,
                            double rotation_tolerance = kDefaultRotationTolerance);

/// Nine significant digits per value.
void write_kitti_poses(std::ostream& out, const Trajectory& traj);
void write_kitti_poses(const std::filesystem::path& path, const Trajectory& traj);

/// Entry k is the distance travelled between frames k and k+1 (n - 1
/// entries for n poses).
std::vector<double> ground_truth_scales(const Trajectory& traj);

struct ScaleErrorStats {
    std::vector<double> rel_errors;  ///< NaN for skipped frames
    double mean = 0.0;
    double median = 0.0;
    double stddev = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
};

/// Relative errors |s_est - s_gt| / s_gt over frames with an estimate and a
/// positive ground truth. Throws Alignment on a length mismatch.
ScaleErrorStats scale_error_stats(std::span<const std::optional<double>> estimates,
                                  std::span<const double> gt_scales);

struct SegmentError {
    std::size_t first = 0;
    std::size_t last = 0;
    double length = 0.0;          ///< nominal segment length, meters
    double arc_length = 0.0;      ///< ground-truth distance actually covered
    double t_err_pct = 0.0;       ///< endpoint translation error / arc length * 100
    double r_err_deg_per_m = 0.0;
};

struct SegmentSummary {
    double length = 0.0;
    std::size_t count = 0;  ///< 0 when the trajectory is shorter than length
    double t_err_pct = 0.0;
    double r_err_deg_per_m = 0.0;
};

struct SegmentReport {
    std::vector<SegmentError> segments;
    std::vector<SegmentSummary> per_length;
    std::size_t count = 0;
    double t_err_pct = 0.0;  ///< average over all segments
    double r_err_deg_per_m = 0.0;
};

inline const std::vector<double> kKittiSegmentLengths{100, 200, 300, 400, 500, 600, 700, 800};

/// A segment starts at every frame and ends at the first frame whose
/// ground-truth arc length from the start reaches L. The error pose is
/// (gt_a^-1 gt_b)^-1 (est_a^-1 est_b).
SegmentReport kitti_segment_errors(const Trajectory& est, const Trajectory& gt,
                                   std::span<const double> lengths);

/// Correspondences of the frame pair (frame - 1, frame).
struct FrameCorrespondences {
    std::int64_t frame = 0;
    std::vector<Correspondence> all;  ///< every row of the frame
    std::vector<Correspondence> roi;  ///< rows with roi = 1
};

/// CSV with header frame,x1,y1,x2,y2,roi. Frames are returned in ascending
/// order.
std::vector<FrameCorrespondences> parse_correspondences_csv(std::istream& in,
                                                            const std::string& source = "<stream>");
void write_correspondences_csv(std::ostream& out, std::span<const FrameCorrespondences> frames);

struct FrameScale {
    std::int64_t frame = 0;
    std::optional<ScaleEstimate> estimate;
};

/// CSV frame,s,valid,nx,ny,nz,h. The plane is in units of a unit-length
/// frame translation.
void write_scales_csv(std::ostream& out, std::span<const FrameScale> scales);
std::vector<FrameScale> parse_scales_csv(std::istream& in, const std::string& source = "<stream>");

/// Settings shared by the command-line tools, read from key=value text.
struct AppConfig {
    double fx = 718.856, fy = 718.856, cx = 607.1928, cy = 185.2157;
    double h_true = 1.7;
    Vec3 prior_n = Vec3::UnitY();
    GateConfig gate;
    EstimatorConfig estimator;
    FilterNoise noise;
    double drift_threshold = kDefaultDriftThreshold;
    int keyframe_interval = 1;
    std::size_t local_window = 10;
    std::uint64_t seed = 42;

    CameraIntrinsics camera() const { return {fx, fy, cx, cy}; }
    CorrectionConfig correction() const;
    void validate() const;
};

/// Unknown keys and malformed values throw Config naming the line. '#'
/// starts a comment. SCALEVO_SEED, when set, overrides the seed.
AppConfig parse_config(std::istream& in, const std::string& source = "<stream>");
AppConfig read_config(const std::filesystem::path& path);
void apply_seed_override(AppConfig& cfg);

/// JSON rendering of the evaluation results (scale statistics optional).
std::string evaluation_report_json(const SegmentReport& segments,
                                   const std::optional<ScaleErrorStats>& scales,
                                   std::size_t frames);

}  // namespace scalevo

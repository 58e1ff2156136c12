#pragma once

// Scale-drift detection and local-map rescaling.
//
// World poses here are camera-to-world (the KITTI convention): pose.t is the
// camera center in world coordinates and pose.R rotates camera axes into the
// world. The relative motion between frames a and b in the two-view
// convention X_b = R X_a + t is pose_b^-1 * pose_a.

#include "scalevo/geometry.hpp"
#include "scalevo/scale_estimators.hpp"
#include "scalevo/scale_filter.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace scalevo {

struct Keyframe {
    std::int64_t id = 0;
    Pose pose_world;
};

struct MapPoint {
    Point3 position;      ///< world coordinates
    std::int64_t owner = 0;  ///< id of the frame that created it
};

struct LocalMap {
    Keyframe anchor;
    std::vector<Keyframe> keyframes;  ///< older keyframes, anchor excluded
    std::vector<MapPoint> points;
};

inline constexpr double kDefaultDriftThreshold = 0.075;

struct DriftMonitor {
    double propagated_scale = 1.0;
    double threshold = kDefaultDriftThreshold;

    void validate() const;
};

/// lambda = s_estimated / s_propagated. Throws NoRatio for an estimate that
/// was gated out or is not positive.
double drift_ratio(const ScaleEstimate& estimate, double s_propagated);

/// True iff |lambda - 1| > monitor.threshold.
bool correction_trigger(double lambda, const DriftMonitor& monitor);

/// Scales every keyframe translation and point about the anchor by s:
/// entities are expressed in the anchor frame, their coordinates multiplied
/// by s and mapped back. Rotations and the anchor pose are unchanged.
LocalMap rescale_local_map(const LocalMap& map, double s);

/// Same transform for a single pose, relative to an anchor pose.
Pose rescale_about_anchor(const Pose& pose, const Pose& anchor, double s);

struct CorrectionConfig {
    DriftMonitor monitor;
    GateConfig gate;
    FilterNoise noise;
    Vec3 prior_n = Vec3::UnitY();
    double h_true = 1.7;
    int keyframe_interval = 1;
    std::size_t local_window = 10;  ///< keyframes in the local map, anchor included
    /// Use the first filtered estimate as the propagated scale instead of
    /// monitor.propagated_scale.
    bool init_scale_from_first = false;

    void validate() const;
};

/// Per-frame measurement from the estimator. The plane is expressed in
/// units where the frame's translation has unit length, as returned by the
/// estimators on an essential-matrix pose.
struct FrameMeasurement {
    std::optional<PlaneEstimate> plane;
};

/// Sparse-optimization estimate for one frame pair with the normal gate
/// applied to both the linear initialization and the refined plane. Empty
/// when a gate rejects it or a pipeline stage fails. The speed gate needs
/// the propagated scale and is applied by run_correction_loop.
std::optional<ScaleEstimate> gated_frame_estimate(std::span<const Correspondence> corrs_all,
                                                  std::span<const Correspondence> corrs_roi,
                                                  const CameraIntrinsics& K, double h_true,
                                                  const Vec3& prior_n,
                                                  const EstimatorConfig& estimator,
                                                  const GateConfig& gate);

enum class TriggerAction { Trigger, Applied };

struct TriggerRecord {
    std::int64_t frame_id = 0;
    double lambda = 1.0;
    TriggerAction action = TriggerAction::Trigger;
};

struct FrameTrace {
    double lambda = 1.0;               ///< NaN when no filtered estimate exists
    double filtered_scale = 0.0;       ///< metric per map unit, 0 when unknown
    GateReason gate = GateReason::Accepted;
    bool measured = false;
};

struct CorrectionResult {
    std::vector<Pose> trajectory;  ///< corrected camera-to-world poses
    std::vector<MapPoint> points;  ///< corrected map points
    std::vector<TriggerRecord> log;
    std::vector<FrameTrace> trace;
    double final_gain = 1.0;
};

/// Local bundle adjustment after a correction. The default does nothing;
/// a SLAM host can attach its own.
using LocalBaHook = std::function<void(LocalMap&)>;

/// Runs the drift monitor over a VO trajectory. measurements[k] belongs to
/// the frame pair (k-1, k); measurements[0] is ignored. points[k], when
/// given, lists map points created at frame k in raw VO world coordinates.
CorrectionResult run_correction_loop(std::span<const Pose> vo_trajectory,
                                     std::span<const FrameMeasurement> measurements,
                                     const CorrectionConfig& config,
                                     std::span<const std::vector<Point3>> points = {},
                                     const LocalBaHook& local_ba = {});

std::string_view to_string(TriggerAction action);

/// Writes "frame_id,lambda,action" lines with a header.
void write_trigger_log(std::ostream& os, std::span<const TriggerRecord> log);

}  // namespace scalevo

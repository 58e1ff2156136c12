#pragma once

// The three ground-plane scale estimators:
//   * triangulation + height consensus,
//   * direct decomposition of the Euclidean homography,
//   * sparse optimization of the plane (n, h) under a fixed relative pose,
//     initialized linearly from the homography and refined with a simplex
//     search on a symmetric Huber transfer cost.
//
// Every estimator returns a scale s such that s * |t_vo| is the metric
// translation of the frame pair.

#include "scalevo/errors.hpp"
#include "scalevo/geometry.hpp"
#include "scalevo/robust_fit.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace scalevo {

enum class ScaleMethod { Triangulation, Decomposition, SparseOptimization };

std::string_view to_string(ScaleMethod method);

struct ScaleEstimate {
    double s = 0.0;
    std::optional<PlaneEstimate> plane;  ///< in the units of the pose used
    std::size_t n_support = 0;
    double residual = 0.0;  ///< method specific
    ScaleMethod method = ScaleMethod::SparseOptimization;
    bool converged = true;
    bool valid = true;
};

struct DecompositionCandidate {
    Mat3 R;
    Vec3 t_over_h;
    Vec3 n;
};

inline constexpr double kDefaultConsensusMu = 50.0;

/// Picks the height with the largest consensus score
/// q_i = sum_{j != i} exp(-mu (h_i - h_j)^2) over points with h_i = n^T X_i > 0
/// and returns s = h_true / h. Exact ties go to the smallest height.
ScaleEstimate scale_from_triangulated_points(std::span<const Point3> points, const Vec3& n_known,
                                             double h_true, double mu = kDefaultConsensusMu);

/// Up to four (R, t/h, n) solutions of a Euclidean homography.
std::vector<DecompositionCandidate> decompose_homography(const Homography& H_euc);

/// Candidate whose plane is visible and in front of both cameras for a
/// majority of the correspondences, closest in normal to prior_n.
DecompositionCandidate select_decomposition(std::span<const DecompositionCandidate> cands,
                                            const Vec3& prior_n,
                                            std::span<const Correspondence> corrs,
                                            const CameraIntrinsics& K);

ScaleEstimate scale_from_decomposition(const DecompositionCandidate& cand, double h_true,
                                       double t_vo_norm);

struct LinearPlaneInit {
    PlaneEstimate plane;
    double rank1_residual = 0.0;  ///< relative Frobenius residual of the fit
    bool inconsistent_motion = false;
};

/// Least-squares solve of a * H_euc - R = t m^T for (a, m); n = m / |m|,
/// h = 1 / |m|.
LinearPlaneInit initial_plane_linear(const Homography& H_euc, const Pose& pose);

inline constexpr double kRank1WarningThreshold = 0.05;

/// Symmetric Huber transfer cost of the plane under a fixed pose.
double plane_transfer_cost(std::span<const Correspondence> corrs, const Pose& pose,
                           const CameraIntrinsics& K, const PlaneEstimate& plane, double r0);

struct PlaneRefinement {
    PlaneEstimate plane;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct RefineOptions {
    double tolerance = 1e-10;
    int max_iterations = 500;
    double normal_step = 0.02;  ///< radians
    double log_height_step = 0.05;
};

PlaneRefinement refine_plane_simplex(std::span<const Correspondence> corrs, const Pose& pose,
                                     const CameraIntrinsics& K, const PlaneEstimate& init,
                                     double r0, const RefineOptions& options = {});

ScaleEstimate scale_from_plane(const PlaneEstimate& plane, double h_true);

struct EstimatorConfig {
    RansacConfig essential{2000, 1.0, 0.999, 42};
    RansacConfig homography{2000, 2.0, 0.999, 43};
    double huber_r0 = 1.0;
    double consensus_mu = kDefaultConsensusMu;
    RefineOptions refine;
};

/// Relative pose and ground homography shared by all estimators.
struct FramePairGeometry {
    FitResult<Pose> pose;
    FitResult<Homography> homography;
    std::vector<Correspondence> roi_inliers;
};

enum class PipelineStage { Essential, Homography, Euclidean, InitialPlane, Refinement, Scale };

std::string_view to_string(PipelineStage stage);

/// Error raised by the multi-stage pipeline; keeps the failing stage.
class PipelineError : public Error {
public:
    PipelineError(PipelineStage stage, const Error& cause);

    PipelineStage stage() const noexcept { return stage_; }

private:
    PipelineStage stage_;
};

FramePairGeometry fit_frame_pair(std::span<const Correspondence> corrs_all,
                                 std::span<const Correspondence> corrs_roi,
                                 const CameraIntrinsics& K, const EstimatorConfig& config);

ScaleEstimate scale_by_triangulation(const FramePairGeometry& geo,
                                     std::span<const Correspondence> corrs_roi,
                                     const CameraIntrinsics& K, double h_true, const Vec3& n_known,
                                     const EstimatorConfig& config);

ScaleEstimate scale_by_decomposition(const FramePairGeometry& geo, const CameraIntrinsics& K,
                                     double h_true, const Vec3& prior_n);

struct SparseDiagnostics {
    LinearPlaneInit init;
    PlaneRefinement refinement;
};

ScaleEstimate scale_by_sparse_optimization(const FramePairGeometry& geo, const CameraIntrinsics& K,
                                           double h_true, const EstimatorConfig& config,
                                           SparseDiagnostics* diagnostics = nullptr);

/// Full sparse pipeline: essential pose on all correspondences, ROI
/// homography, Euclidean form, linear plane, simplex refinement, scale.
/// Failures surface as PipelineError naming the stage.
ScaleEstimate estimate_scale(std::span<const Correspondence> corrs_all,
                             std::span<const Correspondence> corrs_roi, const CameraIntrinsics& K,
                             double h_true, const Vec3& prior_n, const EstimatorConfig& config,
                             SparseDiagnostics* diagnostics = nullptr);

}  // namespace scalevo

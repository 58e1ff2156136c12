#pragma once

#include "scalevo/geometry.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace scalevo {

struct RansacConfig {
    int max_iterations = 2000;
    double inlier_threshold = 2.0;  ///< pixels
    double confidence = 0.999;
    std::uint64_t seed = 42;

    /// Throws Config on violated invariants.
    void validate() const;
};

template <typename Model>
struct FitResult {
    Model model;
    std::vector<bool> inlier_mask;
    double mean_residual = 0.0;  ///< pixels, over inliers only
    int iterations = 0;

    std::size_t inlier_count() const {
        std::size_t n = 0;
        for (bool b : inlier_mask) n += b ? 1 : 0;
        return n;
    }
};

/// Huber loss: r^2 / 2 for r <= r0, r0 (r - r0 / 2) beyond.
double huber_loss(double r, double r0);

/// Normalized least-squares DLT over >= 4 correspondences.
Homography fit_homography_dlt(std::span<const Correspondence> corrs);

/// Per-correspondence symmetric transfer error in pixels:
/// sqrt((|x2 - H x1|^2 + |x1 - H^-1 x2|^2) / 2).
std::vector<double> symmetric_transfer_errors(const Homography& H,
                                              std::span<const Correspondence> corrs);

FitResult<Homography> ransac_homography(std::span<const Correspondence> corrs,
                                        const RansacConfig& config);

/// Normalized 8-point essential matrix on >= 8 correspondences, projected
/// onto the essential manifold (singular values 1, 1, 0).
Mat3 fit_essential_8pt(std::span<const Correspondence> corrs, const CameraIntrinsics& K);

/// The four (R, t) factorizations of E with |t| = 1.
std::vector<Pose> decompose_essential(const Mat3& E);

/// Sampson distance in pixels for each correspondence under E.
std::vector<double> sampson_errors(const Mat3& E, const CameraIntrinsics& K,
                                   std::span<const Correspondence> corrs);

/// Relative pose with unit-norm translation. The factorization of E is
/// chosen by maximal positive-depth count over the inliers.
FitResult<Pose> ransac_essential_pose(std::span<const Correspondence> corrs,
                                      const CameraIntrinsics& K, const RansacConfig& config);

/// Number of correspondences that triangulate in front of both cameras.
std::size_t count_positive_depth(std::span<const Correspondence> corrs, const Pose& pose,
                                 const CameraIntrinsics& K);

}  // namespace scalevo

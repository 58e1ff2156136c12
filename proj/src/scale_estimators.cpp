#include "scalevo/scale_estimators.hpp"

#include "scalevo/kernels/kernels.hpp"
#include "scalevo/nelder_mead.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace scalevo {
namespace {

kernels::Mat3x3 to_rowmajor(const Mat3& M) {
    kernels::Mat3x3 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(3 * r + c)] = M(r, c);
    return out;
}

kernels::PointsSoA to_soa(std::span<const Correspondence> corrs) {
    kernels::PointsSoA soa;
    soa.reserve(corrs.size());
    for (const auto& c : corrs) soa.push(c.x1.x(), c.x1.y(), c.x2.x(), c.x2.y());
    return soa;
}

double transfer_cost(const kernels::PointsSoA& soa, const Pose& pose, const CameraIntrinsics& K,
                     const Vec3& n, double h, double r0) {
    const Mat3 H12 = K.matrix() * (pose.R + pose.t * n.transpose() / h) * K.inverse();
    Eigen::FullPivLU<Mat3> lu(H12);
    if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
    const Mat3 H21 = lu.inverse();
    return kernels::active().huber_transfer_cost(to_rowmajor(H12), to_rowmajor(H21), soa.view(),
                                                 r0);
}

// Orthonormal pair spanning the plane perpendicular to n.
std::pair<Vec3, Vec3> tangent_basis(const Vec3& n) {
    const Vec3 seed = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitZ();
    const Vec3 e1 = (seed - n * n.dot(seed)).normalized();
    return {e1, n.cross(e1)};
}

template <typename Fn>
auto run_stage(PipelineStage stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const PipelineError&) {
        throw;
    } catch (const Error& e) {
        throw PipelineError(stage, e);
    }
}

}  // namespace

std::string_view to_string(ScaleMethod method) {
    switch (method) {
        case ScaleMethod::Triangulation: return "triangulation";
        case ScaleMethod::Decomposition: return "decomposition";
        case ScaleMethod::SparseOptimization: return "sparse_opt";
    }
    return "unknown";
}

std::string_view to_string(PipelineStage stage) {
    switch (stage) {
        case PipelineStage::Essential: return "essential";
        case PipelineStage::Homography: return "homography";
        case PipelineStage::Euclidean: return "euclidean";
        case PipelineStage::InitialPlane: return "initial_plane";
        case PipelineStage::Refinement: return "refinement";
        case PipelineStage::Scale: return "scale";
    }
    return "unknown";
}

PipelineError::PipelineError(PipelineStage stage, const Error& cause)
    : Error(cause.kind(), std::string(to_string(stage)) + " stage: " + cause.what()),
      stage_(stage) {}

ScaleEstimate scale_from_triangulated_points(std::span<const Point3> points, const Vec3& n_known,
                                             double h_true, double mu) {
    if (points.size() < 2) {
        throw Error(ErrorKind::InvalidInput, "height consensus needs at least 2 points");
    }
    if (std::abs(n_known.norm() - 1.0) > 1e-6) {
        throw Error(ErrorKind::InvalidInput, "known ground normal must be unit length");
    }
    std::vector<double> heights;
    heights.reserve(points.size());
    for (const auto& X : points) {
        const double h = n_known.dot(X);
        if (h > 0.0 && std::isfinite(h)) heights.push_back(h);
    }
    if (heights.empty()) {
        throw Error(ErrorKind::InvalidGround, "no point lies on the ground side of the camera");
    }
    // Sorting first makes the selection independent of input order.
    std::sort(heights.begin(), heights.end());
    std::vector<double> q(heights.size());
    kernels::active().height_consensus(heights, mu, q);
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.size(); ++i)
        if (q[i] > q[best]) best = i;

    ScaleEstimate est;
    est.method = ScaleMethod::Triangulation;
    est.s = h_true / heights[best];
    est.plane = PlaneEstimate{n_known, heights[best]};
    est.n_support = heights.size();
    est.residual = q[best];
    return est;
}

std::vector<DecompositionCandidate> decompose_homography(const Homography& H_euc) {
    if (H_euc.kind() != HomographyKind::Euclidean) {
        throw Error(ErrorKind::InvalidInput, "decomposition expects a Euclidean homography");
    }
    Eigen::JacobiSVD<Mat3> svd(H_euc.matrix(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 sigma = svd.singularValues();
    Mat3 H = H_euc.matrix() / sigma(1);
    // R + t n^T / h has determinant h' / h > 0 for a camera that stays on
    // one side of the plane.
    if (H.determinant() < 0.0) H = -H;
    sigma /= sigma(1);

    const double s1 = sigma(0) * sigma(0);
    const double s3 = sigma(2) * sigma(2);
    if (s1 - s3 < 1e-10) {
        throw Error(ErrorKind::PureRotation,
                    "homography is a pure rotation; the plane is unobservable");
    }
    Mat3 V = svd.matrixV();
    if (V.determinant() < 0.0) V = -V;
    const Vec3 v1 = V.col(0), v2 = V.col(1), v3 = V.col(2);

    const double a = std::sqrt(std::max(0.0, 1.0 - s3));
    const double b = std::sqrt(std::max(0.0, s1 - 1.0));
    const double c = std::sqrt(s1 - s3);
    const Vec3 u1 = (a * v1 + b * v3) / c;
    const Vec3 u2 = (a * v1 - b * v3) / c;

    std::vector<DecompositionCandidate> out;
    out.reserve(4);
    for (const Vec3& u : {u1, u2}) {
        Mat3 U, W;
        U << v2, u, v2.cross(u);
        const Vec3 Hv2 = H * v2;
        const Vec3 Hu = H * u;
        W << Hv2, Hu, Hv2.cross(Hu);
        const Mat3 R = W * U.transpose();
        const Vec3 n = v2.cross(u);
        const Vec3 t = (H - R) * n;
        out.push_back({R, t, n});
    }
    out.push_back({out[0].R, -out[0].t_over_h, -out[0].n});
    out.push_back({out[1].R, -out[1].t_over_h, -out[1].n});
    return out;
}

DecompositionCandidate select_decomposition(std::span<const DecompositionCandidate> cands,
                                            const Vec3& prior_n,
                                            std::span<const Correspondence> corrs,
                                            const CameraIntrinsics& K) {
    if (cands.empty()) {
        throw Error(ErrorKind::InvalidInput, "no decomposition candidates");
    }
    const DecompositionCandidate* best = nullptr;
    double best_angle = 0.0;
    for (const auto& cand : cands) {
        std::size_t in_front = 0;
        for (const auto& c : corrs) {
            const Vec3 r1 = K.ray(c.x1);
            const double proj = cand.n.dot(r1);
            if (!(proj > 0.0)) continue;  // plane not visible along this ray
            const Vec3 X1 = r1 / proj;    // on the plane, in units of h
            const Vec3 X2 = cand.R * X1 + cand.t_over_h;
            if (X2.z() > 0.0) ++in_front;
        }
        if (!corrs.empty() && 2 * in_front <= corrs.size()) continue;
        const double angle = angle_between(cand.n, prior_n);
        if (!best || angle < best_angle) {
            best = &cand;
            best_angle = angle;
        }
    }
    if (!best) {
        throw Error(ErrorKind::SelectionFailure,
                    "no decomposition keeps a majority of points in front of both cameras");
    }
    return *best;
}

ScaleEstimate scale_from_decomposition(const DecompositionCandidate& cand, double h_true,
                                       double t_vo_norm) {
    const double ratio = cand.t_over_h.norm();
    if (!(ratio > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "decomposition has zero translation");
    }
    if (!(t_vo_norm > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "VO translation norm must be positive");
    }
    ScaleEstimate est;
    est.method = ScaleMethod::Decomposition;
    est.s = ratio * h_true / t_vo_norm;
    est.plane = PlaneEstimate{cand.n.normalized(), t_vo_norm / ratio};
    return est;
}

LinearPlaneInit initial_plane_linear(const Homography& H_euc, const Pose& pose) {
    if (pose.t.norm() < 1e-12) {
        throw Error(ErrorKind::DegenerateGeometry, "pose translation is zero");
    }
    const Mat3& H = H_euc.matrix();
    // Unknowns (a, m): a * H(i, j) - t(i) * m(j) = R(i, j).
    Eigen::Matrix<double, 9, 4> A = Eigen::Matrix<double, 9, 4>::Zero();
    Eigen::Matrix<double, 9, 1> b;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const int row = 3 * i + j;
            A(row, 0) = H(i, j);
            A(row, 1 + j) = -pose.t(i);
            b(row) = pose.R(i, j);
        }
    }
    const Eigen::Vector4d sol = A.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(b);
    const Vec3 m = sol.tail<3>();
    const double m_norm = m.norm();
    if (!(m_norm > 1e-9) || !std::isfinite(m_norm)) {
        throw Error(ErrorKind::DegenerateGeometry,
                    "homography carries no translation-plane component");
    }
    LinearPlaneInit out;
    out.plane = PlaneEstimate{m / m_norm, 1.0 / m_norm};
    out.rank1_residual = (A * sol - b).norm() / b.norm();
    out.inconsistent_motion = out.rank1_residual > kRank1WarningThreshold;
    return out;
}

double plane_transfer_cost(std::span<const Correspondence> corrs, const Pose& pose,
                           const CameraIntrinsics& K, const PlaneEstimate& plane, double r0) {
    return transfer_cost(to_soa(corrs), pose, K, plane.n, plane.h, r0);
}

PlaneRefinement refine_plane_simplex(std::span<const Correspondence> corrs, const Pose& pose,
                                     const CameraIntrinsics& K, const PlaneEstimate& init,
                                     double r0, const RefineOptions& options) {
    if (corrs.size() < 4) {
        throw Error(ErrorKind::InvalidInput, "plane refinement needs at least 4 correspondences");
    }
    if (!init.valid(1e-6) || !(r0 > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "invalid initial plane or Huber threshold");
    }
    const auto soa = to_soa(corrs);

    PlaneRefinement out;
    out.plane = PlaneEstimate{init.n.normalized(), init.h};
    out.initial_cost = transfer_cost(soa, pose, K, out.plane.n, out.plane.h, r0);
    if (!std::isfinite(out.initial_cost)) {
        throw Error(ErrorKind::InvalidInput, "transfer cost is not finite at the initial plane");
    }
    out.final_cost = out.initial_cost;

    NelderMeadOptions nm;
    nm.tolerance = options.tolerance;
    int budget = options.max_iterations;
    // A second pass re-centres the tangent parametrization on the first
    // result; it only runs when budget remains.
    for (int pass = 0; pass < 2 && budget > 0; ++pass) {
        const Vec3 n0 = out.plane.n;
        const double h0 = out.plane.h;
        const auto [e1, e2] = tangent_basis(n0);
        auto unpack = [&](const std::array<double, 3>& p) {
            return std::pair<Vec3, double>((n0 + p[0] * e1 + p[1] * e2).normalized(),
                                           h0 * std::exp(p[2]));
        };
        auto cost = [&](const std::array<double, 3>& p) {
            const auto [n, h] = unpack(p);
            return transfer_cost(soa, pose, K, n, h, r0);
        };
        nm.max_iterations = budget;
        const double scale = pass == 0 ? 1.0 : 0.1;
        const auto res = nelder_mead<3>(
            cost, {0.0, 0.0, 0.0},
            {options.normal_step * scale, options.normal_step * scale,
             options.log_height_step * scale},
            nm);
        budget -= res.iterations;
        out.iterations += res.iterations;
        out.converged = res.converged;
        if (res.value <= out.final_cost) {
            const auto [n, h] = unpack(res.x);
            out.plane = PlaneEstimate{n, h};
            out.final_cost = res.value;
        }
        if (!res.converged) break;
    }
    return out;
}

ScaleEstimate scale_from_plane(const PlaneEstimate& plane, double h_true) {
    if (!(plane.h > 0.0)) {
        throw Error(ErrorKind::InvalidPlane, "plane distance must be positive");
    }
    ScaleEstimate est;
    est.method = ScaleMethod::SparseOptimization;
    est.s = h_true / plane.h;
    est.plane = plane;
    return est;
}

FramePairGeometry fit_frame_pair(std::span<const Correspondence> corrs_all,
                                 std::span<const Correspondence> corrs_roi,
                                 const CameraIntrinsics& K, const EstimatorConfig& config) {
    if (corrs_all.empty() || corrs_roi.empty()) {
        throw Error(ErrorKind::InvalidInput, "both correspondence sets must be nonempty");
    }
    auto pose = run_stage(PipelineStage::Essential,
                          [&] { return ransac_essential_pose(corrs_all, K, config.essential); });
    auto homography = run_stage(PipelineStage::Homography,
                                [&] { return ransac_homography(corrs_roi, config.homography); });
    std::vector<Correspondence> inliers;
    for (std::size_t i = 0; i < corrs_roi.size(); ++i)
        if (homography.inlier_mask[i]) inliers.push_back(corrs_roi[i]);
    return {std::move(pose), std::move(homography), std::move(inliers)};
}

ScaleEstimate scale_by_triangulation(const FramePairGeometry& geo,
                                     std::span<const Correspondence> corrs_roi,
                                     const CameraIntrinsics& K, double h_true, const Vec3& n_known,
                                     const EstimatorConfig& config) {
    const Pose& pose = geo.pose.model;
    std::vector<Point3> points;
    points.reserve(corrs_roi.size());
    for (const auto& c : corrs_roi) {
        try {
            const Point3 X = triangulate_two_view(c, pose, K);
            if (X.z() > 0.0 && pose.apply(X).z() > 0.0) points.push_back(X);
        } catch (const Error&) {
        }
    }
    return run_stage(PipelineStage::Scale, [&] {
        auto est = scale_from_triangulated_points(points, n_known, h_true, config.consensus_mu);
        est.s /= pose.t.norm();
        return est;
    });
}

ScaleEstimate scale_by_decomposition(const FramePairGeometry& geo, const CameraIntrinsics& K,
                                     double h_true, const Vec3& prior_n) {
    const Homography H_euc = run_stage(PipelineStage::Euclidean, [&] {
        return euclidean_from_projective(geo.homography.model, K);
    });
    return run_stage(PipelineStage::Scale, [&] {
        const auto cands = decompose_homography(H_euc);
        const auto chosen = select_decomposition(cands, prior_n, geo.roi_inliers, K);
        auto est = scale_from_decomposition(chosen, h_true, geo.pose.model.t.norm());
        est.n_support = geo.roi_inliers.size();
        est.residual = geo.homography.mean_residual;
        return est;
    });
}

ScaleEstimate scale_by_sparse_optimization(const FramePairGeometry& geo, const CameraIntrinsics& K,
                                           double h_true, const EstimatorConfig& config,
                                           SparseDiagnostics* diagnostics) {
    const Homography H_euc = run_stage(PipelineStage::Euclidean, [&] {
        return euclidean_from_projective(geo.homography.model, K);
    });
    const LinearPlaneInit init = run_stage(PipelineStage::InitialPlane, [&] {
        return initial_plane_linear(H_euc, geo.pose.model);
    });
    const PlaneRefinement refined = run_stage(PipelineStage::Refinement, [&] {
        return refine_plane_simplex(geo.roi_inliers, geo.pose.model, K, init.plane,
                                    config.huber_r0, config.refine);
    });
    if (diagnostics) *diagnostics = {init, refined};
    return run_stage(PipelineStage::Scale, [&] {
        auto est = scale_from_plane(refined.plane, h_true);
        est.n_support = geo.roi_inliers.size();
        est.residual = refined.final_cost;
        est.converged = refined.converged;
        return est;
    });
}

ScaleEstimate estimate_scale(std::span<const Correspondence> corrs_all,
                             std::span<const Correspondence> corrs_roi, const CameraIntrinsics& K,
                             double h_true, const Vec3& prior_n, const EstimatorConfig& config,
                             SparseDiagnostics* diagnostics) {
    (void)prior_n;
    const auto geo = fit_frame_pair(corrs_all, corrs_roi, K, config);
    return scale_by_sparse_optimization(geo, K, h_true, config, diagnostics);
}

}  // namespace scalevo

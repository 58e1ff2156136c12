#include "scalevo/robust_fit.hpp"

#include "scalevo/errors.hpp"
#include "scalevo/kernels/kernels.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace scalevo {
namespace {

// Similarity that moves the centroid to the origin and the mean distance
// to sqrt(2).
Mat3 normalizing_transform(std::span<const Vec2> pts) {
    Vec2 centroid = Vec2::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= static_cast<double>(pts.size());
    const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
    Mat3 T;
    T << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
    return T;
}

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

bool collinear(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 u = b - a;
    const Vec2 v = c - a;
    const double area = std::abs(u.x() * v.y() - u.y() * v.x());
    const double scale = std::max({u.squaredNorm(), v.squaredNorm(), 1e-300});
    return area <= 1e-9 * scale;
}

bool has_collinear_triple(std::span<const Correspondence> sample) {
    const std::size_t n = sample.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k) {
                if (collinear(sample[i].x1, sample[j].x1, sample[k].x1) ||
                    collinear(sample[i].x2, sample[j].x2, sample[k].x2)) {
                    return true;
                }
            }
    return false;
}

// Draws `k` distinct indices from [0, n).
template <typename Rng>
void draw_sample(Rng& rng, std::size_t n, std::size_t k, std::vector<std::size_t>& out) {
    out.clear();
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    while (out.size() < k) {
        const std::size_t idx = dist(rng);
        if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
    }
}

int adaptive_iterations(double inlier_ratio, std::size_t sample_size, double confidence,
                        int cap) {
    const double p_good = std::pow(inlier_ratio, static_cast<double>(sample_size));
    if (p_good >= 1.0) return 1;
    if (p_good <= 0.0) return cap;
    const double needed = std::log(1.0 - confidence) / std::log(1.0 - p_good);
    if (!std::isfinite(needed) || needed >= cap) return cap;
    return std::max(1, static_cast<int>(std::ceil(needed)));
}

struct Score {
    std::size_t inliers = 0;
    double sq_sum = std::numeric_limits<double>::infinity();

    bool better_than(const Score& o) const {
        return inliers > o.inliers || (inliers == o.inliers && sq_sum < o.sq_sum);
    }
};

Score score_errors(std::span<const double> sq_errors, double threshold_sq,
                   std::vector<bool>* mask) {
    Score s;
    s.sq_sum = 0.0;
    if (mask) mask->assign(sq_errors.size(), false);
    for (std::size_t i = 0; i < sq_errors.size(); ++i) {
        if (sq_errors[i] <= threshold_sq) {
            ++s.inliers;
            s.sq_sum += sq_errors[i];
            if (mask) (*mask)[i] = true;
        }
    }
    return s;
}

std::vector<Correspondence> select(std::span<const Correspondence> corrs,
                                   const std::vector<bool>& mask) {
    std::vector<Correspondence> out;
    for (std::size_t i = 0; i < corrs.size(); ++i)
        if (mask[i]) out.push_back(corrs[i]);
    return out;
}

double mean_sqrt_over(std::span<const double> sq_errors, const std::vector<bool>& mask) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < sq_errors.size(); ++i) {
        if (!mask[i]) continue;
        sum += std::sqrt(sq_errors[i]);
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

void homography_sq_errors(const Homography& H, const kernels::PointsSoA& soa,
                          std::vector<double>& out) {
    out.resize(soa.size());
    kernels::active().symmetric_transfer_sq(to_rowmajor(H.matrix()),
                                            to_rowmajor(H.matrix().inverse()), soa.view(), out);
}

Mat3 fundamental_from_essential(const Mat3& E, const CameraIntrinsics& K) {
    const Mat3 Ki = K.inverse();
    return Ki.transpose() * E * Ki;
}

void sampson_sq_errors(const Mat3& E, const CameraIntrinsics& K, const kernels::PointsSoA& soa,
                       std::vector<double>& out) {
    out.resize(soa.size());
    kernels::active().sampson_sq(to_rowmajor(fundamental_from_essential(E, K)), soa.view(), out);
}

// Linear 8-point solve; returns E and the ratio of the seventh to the first
// singular value of the design matrix (0 when the null space is not 1-D).
std::pair<Mat3, double> essential_linear(std::span<const Correspondence> corrs,
                                         const CameraIntrinsics& K) {
    std::vector<Vec2> r1, r2;
    r1.reserve(corrs.size());
    r2.reserve(corrs.size());
    for (const auto& c : corrs) {
        r1.push_back(K.ray(c.x1).head<2>());
        r2.push_back(K.ray(c.x2).head<2>());
    }
    const Mat3 T1 = normalizing_transform(r1);
    const Mat3 T2 = normalizing_transform(r2);

    Eigen::MatrixXd A(static_cast<Eigen::Index>(corrs.size()), 9);
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        const Vec3 a = T1 * r1[i].homogeneous();
        const Vec3 b = T2 * r2[i].homogeneous();
        A.row(static_cast<Eigen::Index>(i)) << b.x() * a.x(), b.x() * a.y(), b.x(), b.y() * a.x(),
            b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::VectorXd e = svd.matrixV().col(8);
    const auto& sv = svd.singularValues();
    const double conditioning = sv.size() >= 7 && sv(0) > 0.0 ? sv(6) / sv(0) : 0.0;

    Mat3 En;
    En << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
    Mat3 E = T2.transpose() * En * T1;

    Eigen::JacobiSVD<Mat3> esvd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    E = esvd.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() * esvd.matrixV().transpose();
    return {E, conditioning};
}

}  // namespace

void RansacConfig::validate() const {
    if (max_iterations < 1) throw Error(ErrorKind::Config, "ransac max_iterations must be >= 1");
    if (!(inlier_threshold > 0.0))
        throw Error(ErrorKind::Config, "ransac inlier_threshold must be > 0");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw Error(ErrorKind::Config, "ransac confidence must be in (0, 1)");
}

double huber_loss(double r, double r0) {
    if (r <= r0) return 0.5 * r * r;
    return r0 * (r - 0.5 * r0);
}

Homography fit_homography_dlt(std::span<const Correspondence> corrs) {
    if (corrs.size() < 4) {
        throw Error(ErrorKind::DegenerateSample, "homography needs at least 4 correspondences");
    }
    if (corrs.size() == 4 && has_collinear_triple(corrs)) {
        throw Error(ErrorKind::DegenerateSample, "three of the four points are collinear");
    }
    std::vector<Vec2> p1, p2;
    p1.reserve(corrs.size());
    p2.reserve(corrs.size());
    for (const auto& c : corrs) {
        if (!c.x1.allFinite() || !c.x2.allFinite())
            throw Error(ErrorKind::InvalidInput, "non-finite correspondence");
        p1.push_back(c.x1);
        p2.push_back(c.x2);
    }
    const Mat3 T1 = normalizing_transform(p1);
    const Mat3 T2 = normalizing_transform(p2);

    const auto n = static_cast<Eigen::Index>(corrs.size());
    Eigen::MatrixXd A(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 a = T1 * p1[static_cast<std::size_t>(i)].homogeneous();
        const Vec3 b = T2 * p2[static_cast<std::size_t>(i)].homogeneous();
        A.row(2 * i) << 0.0, 0.0, 0.0, -a.x(), -a.y(), -1.0, b.y() * a.x(), b.y() * a.y(), b.y();
        A.row(2 * i + 1) << a.x(), a.y(), 1.0, 0.0, 0.0, 0.0, -b.x() * a.x(), -b.x() * a.y(),
            -b.x();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(7) <= 1e-10 * sv(0)) {
        throw Error(ErrorKind::DegenerateSample, "correspondences do not determine a homography");
    }
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Mat3 Hn;
    Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    return {T2.inverse() * Hn * T1, HomographyKind::Projective};
}

std::vector<double> symmetric_transfer_errors(const Homography& H,
                                              std::span<const Correspondence> corrs) {
    const auto soa = to_soa(corrs);
    std::vector<double> err;
    homography_sq_errors(H, soa, err);
    for (auto& e : err) e = std::sqrt(e);
    return err;
}

FitResult<Homography> ransac_homography(std::span<const Correspondence> corrs,
                                        const RansacConfig& config) {
    config.validate();
    if (corrs.size() < 4) {
        throw Error(ErrorKind::FitFailure, "homography RANSAC needs at least 4 correspondences");
    }
    const auto soa = to_soa(corrs);
    const double thr_sq = config.inlier_threshold * config.inlier_threshold;
    std::mt19937_64 rng(config.seed);

    std::vector<std::size_t> idx;
    std::vector<double> err;
    std::array<Correspondence, 4> sample;
    Score best;
    Mat3 best_H = Mat3::Identity();
    bool found = false;
    int needed = config.max_iterations;
    int it = 0;
    for (; it < needed && it < config.max_iterations; ++it) {
        draw_sample(rng, corrs.size(), 4, idx);
        for (std::size_t k = 0; k < 4; ++k) sample[k] = corrs[idx[k]];
        if (has_collinear_triple(sample)) continue;
        try {
            const Homography H = fit_homography_dlt(sample);
            homography_sq_errors(H, soa, err);
            const Score s = score_errors(err, thr_sq, nullptr);
            if (!found || s.better_than(best)) {
                best = s;
                best_H = H.matrix();
                found = true;
                needed = adaptive_iterations(
                    static_cast<double>(s.inliers) / static_cast<double>(corrs.size()), 4,
                    config.confidence, config.max_iterations);
            }
        } catch (const Error&) {
            continue;
        }
    }
    if (!found || best.inliers < 4) {
        throw Error(ErrorKind::FitFailure, "homography RANSAC found fewer than 4 inliers");
    }

    FitResult<Homography> result{Homography(best_H, HomographyKind::Projective), {}, 0.0, it};
    homography_sq_errors(result.model, soa, err);
    score_errors(err, thr_sq, &result.inlier_mask);
    // Least-squares refit on the consensus set until it stops changing.
    for (int round = 0; round < 5; ++round) {
        const auto inliers = select(corrs, result.inlier_mask);
        if (inliers.size() < 4) break;
        Homography refit = result.model;
        try {
            refit = fit_homography_dlt(inliers);
        } catch (const Error&) {
            break;
        }
        std::vector<bool> mask;
        homography_sq_errors(refit, soa, err);
        const Score s = score_errors(err, thr_sq, &mask);
        if (s.inliers < 4) break;
        result.model = refit;
        const bool stable = mask == result.inlier_mask;
        result.inlier_mask = std::move(mask);
        if (stable) break;
    }
    homography_sq_errors(result.model, soa, err);
    result.mean_residual = mean_sqrt_over(err, result.inlier_mask);
    if (result.inlier_count() < 4) {
        throw Error(ErrorKind::FitFailure, "homography RANSAC found fewer than 4 inliers");
    }
    return result;
}

Mat3 fit_essential_8pt(std::span<const Correspondence> corrs, const CameraIntrinsics& K) {
    if (corrs.size() < 8) {
        throw Error(ErrorKind::DegenerateSample, "essential matrix needs at least 8 correspondences");
    }
    return essential_linear(corrs, K).first;
}

std::vector<Pose> decompose_essential(const Mat3& E) {
    Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 U = svd.matrixU();
    Mat3 V = svd.matrixV();
    if (U.determinant() < 0.0) U = -U;
    if (V.determinant() < 0.0) V = -V;
    Mat3 W;
    W << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
    const Mat3 Ra = U * W * V.transpose();
    const Mat3 Rb = U * W.transpose() * V.transpose();
    const Vec3 t = U.col(2).normalized();
    return {Pose{Ra, t}, Pose{Ra, -t}, Pose{Rb, t}, Pose{Rb, -t}};
}

std::vector<double> sampson_errors(const Mat3& E, const CameraIntrinsics& K,
                                   std::span<const Correspondence> corrs) {
    const auto soa = to_soa(corrs);
    std::vector<double> err;
    sampson_sq_errors(E, K, soa, err);
    for (auto& e : err) e = std::sqrt(e);
    return err;
}

std::size_t count_positive_depth(std::span<const Correspondence> corrs, const Pose& pose,
                                 const CameraIntrinsics& K) {
    std::size_t count = 0;
    for (const auto& c : corrs) {
        try {
            const Point3 X = triangulate_two_view(c, pose, K);
            if (X.z() > 0.0 && pose.apply(X).z() > 0.0) ++count;
        } catch (const Error&) {
        }
    }
    return count;
}

FitResult<Pose> ransac_essential_pose(std::span<const Correspondence> corrs,
                                      const CameraIntrinsics& K, const RansacConfig& config) {
    config.validate();
    if (corrs.size() < 8) {
        throw Error(ErrorKind::FitFailure, "essential RANSAC needs at least 8 correspondences");
    }
    const auto soa = to_soa(corrs);
    const double thr_sq = config.inlier_threshold * config.inlier_threshold;
    std::mt19937_64 rng(config.seed);

    std::vector<std::size_t> idx;
    std::vector<double> err;
    std::vector<Correspondence> sample(8);
    Score best;
    Mat3 best_E = Mat3::Zero();
    bool found = false;
    int ill_conditioned = 0;
    int needed = config.max_iterations;
    int it = 0;
    for (; it < needed && it < config.max_iterations; ++it) {
        draw_sample(rng, corrs.size(), 8, idx);
        for (std::size_t k = 0; k < 8; ++k) sample[k] = corrs[idx[k]];
        const auto [E, conditioning] = essential_linear(sample, K);
        if (!E.allFinite() || conditioning < 1e-12) {
            ++ill_conditioned;
            continue;
        }
        sampson_sq_errors(E, K, soa, err);
        const Score s = score_errors(err, thr_sq, nullptr);
        if (!found || s.better_than(best)) {
            best = s;
            best_E = E;
            found = true;
            needed = adaptive_iterations(
                static_cast<double>(s.inliers) / static_cast<double>(corrs.size()), 8,
                config.confidence, config.max_iterations);
        }
    }
    if (!found && ill_conditioned > 0) {
        // Every sample leaves a multi-dimensional null space: no translation.
        throw Error(ErrorKind::DegenerateMotion,
                    "epipolar constraints leave the translation undetermined");
    }
    if (!found || best.inliers < 8) {
        throw Error(ErrorKind::FitFailure, "essential RANSAC found fewer than 8 inliers");
    }

    std::vector<bool> mask;
    sampson_sq_errors(best_E, K, soa, err);
    score_errors(err, thr_sq, &mask);
    Mat3 E = best_E;
    double conditioning = 1.0;
    for (int round = 0; round < 5; ++round) {
        const auto inliers = select(corrs, mask);
        if (inliers.size() < 8) break;
        const auto [refit, cond] = essential_linear(inliers, K);
        std::vector<bool> refit_mask;
        sampson_sq_errors(refit, K, soa, err);
        if (score_errors(err, thr_sq, &refit_mask).inliers < 8) break;
        E = refit;
        conditioning = cond;
        const bool stable = refit_mask == mask;
        mask = std::move(refit_mask);
        if (stable) break;
    }
    if (conditioning < 1e-9) {
        throw Error(ErrorKind::DegenerateMotion,
                    "epipolar constraints leave the translation undetermined");
    }

    const auto inliers = select(corrs, mask);
    const auto candidates = decompose_essential(E);
    std::size_t best_count = 0;
    const Pose* chosen = nullptr;
    for (const auto& cand : candidates) {
        const std::size_t count = count_positive_depth(inliers, cand, K);
        if (count > best_count) {
            best_count = count;
            chosen = &cand;
        }
    }
    if (!chosen) {
        throw Error(ErrorKind::DegenerateMotion, "no essential factorization passes cheirality");
    }

    FitResult<Pose> result{*chosen, std::move(mask), 0.0, it};
    sampson_sq_errors(E, K, soa, err);
    result.mean_residual = mean_sqrt_over(err, result.inlier_mask);
    return result;
}

}  // namespace scalevo

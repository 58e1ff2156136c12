#pragma once

// Independent generators for test oracles. Scene points are projected
// directly through K and the pose; nothing here goes through the library's
// homography or synthesis code.

#include "scalevo/geometry.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace scalevo::test {

inline Mat3 random_rotation(std::mt19937_64& rng, double max_angle) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(-max_angle, max_angle);
    Vec3 axis(g(rng), g(rng), g(rng));
    return Eigen::AngleAxisd(u(rng), axis.normalized()).toRotationMatrix();
}

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    return Vec3(g(rng), g(rng), g(rng)).normalized();
}

inline CameraIntrinsics kitti_camera() { return {718.856, 718.856, 607.1928, 185.2157}; }

inline Vec2 project(const CameraIntrinsics& K, const Vec3& X) {
    return {K.fx() * X.x() / X.z() + K.cx(), K.fy() * X.y() / X.z() + K.cy()};
}

/// Forward motion of a road vehicle: yaw about the camera y axis and a step
/// of length d mostly along +z, as X2 = R X1 + t.
inline Pose vehicle_motion(double yaw, double d, double lateral = 0.0) {
    const Mat3 R = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
    const Vec3 c(lateral, 0.0, std::sqrt(d * d - lateral * lateral));
    return {R, -R * c};
}

/// Ground points below the camera (n = +y, height h) seen in both frames.
inline std::vector<Correspondence> ground_correspondences(const CameraIntrinsics& K,
                                                          const Pose& pose, double h,
                                                          std::size_t n, std::mt19937_64& rng,
                                                          double sigma = 0.0) {
    std::uniform_real_distribution<double> ux(-4.0, 4.0), uz(6.0, 25.0);
    std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
    std::vector<Correspondence> out;
    while (out.size() < n) {
        const Vec3 X1(ux(rng), h, uz(rng));
        const Vec3 X2 = pose.apply(X1);
        if (X2.z() < 1.0) continue;
        Vec2 x2 = project(K, X2);
        if (sigma > 0.0) x2 += Vec2(sigma * noise(rng), sigma * noise(rng));
        out.push_back({project(K, X1), x2});
    }
    return out;
}

/// General 3D points in front of both cameras.
inline std::vector<Correspondence> scene_correspondences(const CameraIntrinsics& K,
                                                         const Pose& pose, std::size_t n,
                                                         std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uxy(-10.0, 10.0), uz(5.0, 50.0);
    std::vector<Correspondence> out;
    while (out.size() < n) {
        const Vec3 X1(uxy(rng), uxy(rng) * 0.3, uz(rng));
        const Vec3 X2 = pose.apply(X1);
        if (X2.z() < 1.0) continue;
        out.push_back({project(K, X1), project(K, X2)});
    }
    return out;
}

}  // namespace scalevo::test

#pragma once

// Data-parallel inner loops shared by the estimators. Every kernel has a
// scalar reference implementation; an AVX2/FMA variant is selected at
// runtime when the CPU supports it. Both variants honour the same contract
// and are equivalence-tested against each other.

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace scalevo::kernels {

/// Row-major 3x3 matrix.
using Mat3x3 = std::array<double, 9>;

/// Structure-of-arrays view over correspondences (pixels).
struct PointsView {
    std::span<const double> x1, y1, x2, y2;

    std::size_t size() const { return x1.size(); }
};

/// Owning SoA buffer; build once, view many times.
struct PointsSoA {
    std::vector<double> x1, y1, x2, y2;

    void reserve(std::size_t n);
    void push(double ax, double ay, double bx, double by);
    std::size_t size() const { return x1.size(); }
    PointsView view() const { return {x1, y1, x2, y2}; }
};

struct KernelTable {
    std::string_view name;

    /// out[i] = (|x2 - fwd(x1)|^2 + |x1 - bwd(x2)|^2) / 2. Points mapped to
    /// infinity yield +inf.
    void (*symmetric_transfer_sq)(const Mat3x3& fwd, const Mat3x3& bwd, PointsView pts,
                                  std::span<double> out);

    /// Sum over i of huber(|x2 - fwd(x1)|) + huber(|x1 - bwd(x2)|) with knee r0.
    double (*huber_transfer_cost)(const Mat3x3& fwd, const Mat3x3& bwd, PointsView pts,
                                  double r0);

    /// out[i] = squared Sampson distance of (x1, x2) under fundamental F.
    void (*sampson_sq)(const Mat3x3& F, PointsView pts, std::span<double> out);

    /// q[i] = sum_{j != i} exp(-mu (h[i] - h[j])^2).
    void (*height_consensus)(std::span<const double> h, double mu, std::span<double> q);
};

enum class Backend { Scalar, Avx2 };

const KernelTable& scalar_table();

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table();

/// Table used by the library. Chosen once from CPU features; the env var
/// SCALEVO_SIMD=scalar pins the scalar path.
const KernelTable& active();

/// Overrides the runtime choice (tests, benchmarking). Returns false when the
/// requested backend is unavailable.
bool force_backend(Backend backend);

Backend active_backend();

}  // namespace scalevo::kernels

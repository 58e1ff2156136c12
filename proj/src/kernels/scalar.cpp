#include "kernels_internal.hpp"

#include <cmath>
#include <limits>

namespace scalevo::kernels {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Squared transfer distance from (x, y) mapped by M to (tx, ty).
inline double transfer_sq(const Mat3x3& M, double x, double y, double tx, double ty) {
    const double u = M[0] * x + M[1] * y + M[2];
    const double v = M[3] * x + M[4] * y + M[5];
    const double w = M[6] * x + M[7] * y + M[8];
    if (std::abs(w) < kMinHomogeneous) return kInf;
    const double dx = u / w - tx;
    const double dy = v / w - ty;
    return dx * dx + dy * dy;
}

inline double huber_from_sq(double r_sq, double r0) {
    if (r_sq <= r0 * r0) return 0.5 * r_sq;
    return r0 * (std::sqrt(r_sq) - 0.5 * r0);
}

void symmetric_transfer_sq(const Mat3x3& fwd, const Mat3x3& bwd, PointsView pts,
                           std::span<double> out) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double f = transfer_sq(fwd, pts.x1[i], pts.y1[i], pts.x2[i], pts.y2[i]);
        const double b = transfer_sq(bwd, pts.x2[i], pts.y2[i], pts.x1[i], pts.y1[i]);
        out[i] = 0.5 * (f + b);
    }
}

double huber_transfer_cost(const Mat3x3& fwd, const Mat3x3& bwd, PointsView pts, double r0) {
    double cost = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double f = transfer_sq(fwd, pts.x1[i], pts.y1[i], pts.x2[i], pts.y2[i]);
        const double b = transfer_sq(bwd, pts.x2[i], pts.y2[i], pts.x1[i], pts.y1[i]);
        cost += huber_from_sq(f, r0) + huber_from_sq(b, r0);
    }
    return cost;
}

void sampson_sq(const Mat3x3& F, PointsView pts, std::span<double> out) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double x1 = pts.x1[i], y1 = pts.y1[i], x2 = pts.x2[i], y2 = pts.y2[i];
        // F x1 and F^T x2
        const double a0 = F[0] * x1 + F[1] * y1 + F[2];
        const double a1 = F[3] * x1 + F[4] * y1 + F[5];
        const double a2 = F[6] * x1 + F[7] * y1 + F[8];
        const double b0 = F[0] * x2 + F[3] * y2 + F[6];
        const double b1 = F[1] * x2 + F[4] * y2 + F[7];
        const double e = x2 * a0 + y2 * a1 + a2;
        const double denom = a0 * a0 + a1 * a1 + b0 * b0 + b1 * b1;
        out[i] = denom > 0.0 ? e * e / denom : kInf;
    }
}

void height_consensus(std::span<const double> h, double mu, std::span<double> q) {
    const std::size_t n = h.size();
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = h[i] - h[j];
            sum += std::exp(-mu * d * d);
        }
        q[i] = sum;
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{"scalar", &symmetric_transfer_sq, &huber_transfer_cost,
                                   &sampson_sq, &height_consensus};
    return table;
}

}  // namespace scalevo::kernels

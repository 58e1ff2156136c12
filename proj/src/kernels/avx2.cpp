// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma
// and is only reached through the dispatch table after a CPU feature check.

#include "kernels_internal.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace scalevo::kernels {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double transfer_sq_1(const Mat3x3& M, double x, double y, double tx, double ty) {
    const double u = M[0] * x + M[1] * y + M[2];
    const double v = M[3] * x + M[4] * y + M[5];
    const double w = M[6] * x + M[7] * y + M[8];
    if (std::abs(w) < kMinHomogeneous) return kInf;
    const double dx = u / w - tx;
    const double dy = v / w - ty;
    return dx * dx + dy * dy;
}

inline double huber_from_sq_1(double r_sq, double r0) {
    if (r_sq <= r0 * r0) return 0.5 * r_sq;
    return r0 * (std::sqrt(r_sq) - 0.5 * r0);
}

struct Mat3Lanes {
    __m256d m[9];
    explicit Mat3Lanes(const Mat3x3& M) {
        for (int k = 0; k < 9; ++k) m[k] = _mm256_set1_pd(M[k]);
    }
};

// Squared transfer distance for four points at once; +inf where |w| is tiny.
inline __m256d transfer_sq_4(const Mat3Lanes& M, __m256d x, __m256d y, __m256d tx, __m256d ty) {
    const __m256d u = _mm256_fmadd_pd(M.m[0], x, _mm256_fmadd_pd(M.m[1], y, M.m[2]));
    const __m256d v = _mm256_fmadd_pd(M.m[3], x, _mm256_fmadd_pd(M.m[4], y, M.m[5]));
    const __m256d w = _mm256_fmadd_pd(M.m[6], x, _mm256_fmadd_pd(M.m[7], y, M.m[8]));
    const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    const __m256d tiny = _mm256_cmp_pd(_mm256_and_pd(w, abs_mask),
                                       _mm256_set1_pd(kMinHomogeneous), _CMP_LT_OQ);
    const __m256d dx = _mm256_sub_pd(_mm256_div_pd(u, w), tx);
    const __m256d dy = _mm256_sub_pd(_mm256_div_pd(v, w), ty);
    const __m256d d2 = _mm256_fmadd_pd(dx, dx, _mm256_mul_pd(dy, dy));
    return _mm256_blendv_pd(d2, _mm256_set1_pd(kInf), tiny);
}

inline __m256d huber_from_sq_4(__m256d r_sq, __m256d r0) {
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d quadratic = _mm256_mul_pd(half, r_sq);
    const __m256d linear =
        _mm256_mul_pd(r0, _mm256_sub_pd(_mm256_sqrt_pd(r_sq), _mm256_mul_pd(half, r0)));
    const __m256d inside = _mm256_cmp_pd(r_sq, _mm256_mul_pd(r0, r0), _CMP_LE_OQ);
    return _mm256_blendv_pd(linear, quadratic, inside);
}

void symmetric_transfer_sq(const Mat3x3& fwd, const Mat3x3& bwd, PointsView pts,
                           std::span<double> out) {
    const Mat3Lanes F(fwd), B(bwd);
    const std::size_t n = pts.size();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x1 = _mm256_loadu_pd(&pts.x1[i]);
        const __m256d y1 = _mm256_loadu_pd(&pts.y1[i]);
        const __m256d x2 = _mm256_loadu_pd(&pts.x2[i]);
        const __m256d y2 = _mm256_loadu_pd(&pts.y2[i]);
        const __m256d f = transfer_sq_4(F, x1, y1, x2, y2);
        const __m256d b = transfer_sq_4(B, x2, y2, x1, y1);
        _mm256_storeu_pd(&out[i], _mm256_mul_pd(_mm256_set1_pd(0.5), _mm256_add_pd(f, b)));
    }
    for (; i < n; ++i) {
        const double f = transfer_sq_1(fwd, pts.x1[i], pts.y1[i], pts.x2[i], pts.y2[i]);
        const double b = transfer_sq_1(bwd, pts.x2[i], pts.y2[i], pts.x1[i], pts.y1[i]);
        out[i] = 0.5 * (f + b);
    }
}

double huber_transfer_cost(const Mat3x3& fwd, const Mat3x3& bwd, PointsView pts, double r0) {
    const Mat3Lanes F(fwd), B(bwd);
    const __m256d knee = _mm256_set1_pd(r0);
    const std::size_t n = pts.size();
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x1 = _mm256_loadu_pd(&pts.x1[i]);
        const __m256d y1 = _mm256_loadu_pd(&pts.y1[i]);
        const __m256d x2 = _mm256_loadu_pd(&pts.x2[i]);
        const __m256d y2 = _mm256_loadu_pd(&pts.y2[i]);
        const __m256d f = huber_from_sq_4(transfer_sq_4(F, x1, y1, x2, y2), knee);
        const __m256d b = huber_from_sq_4(transfer_sq_4(B, x2, y2, x1, y1), knee);
        acc = _mm256_add_pd(acc, _mm256_add_pd(f, b));
    }
    double cost = hsum(acc);
    for (; i < n; ++i) {
        const double f = transfer_sq_1(fwd, pts.x1[i], pts.y1[i], pts.x2[i], pts.y2[i]);
        const double b = transfer_sq_1(bwd, pts.x2[i], pts.y2[i], pts.x1[i], pts.y1[i]);
        cost += huber_from_sq_1(f, r0) + huber_from_sq_1(b, r0);
    }
    return cost;
}

void sampson_sq(const Mat3x3& Fm, PointsView pts, std::span<double> out) {
    const Mat3Lanes F(Fm);
    const std::size_t n = pts.size();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x1 = _mm256_loadu_pd(&pts.x1[i]);
        const __m256d y1 = _mm256_loadu_pd(&pts.y1[i]);
        const __m256d x2 = _mm256_loadu_pd(&pts.x2[i]);
        const __m256d y2 = _mm256_loadu_pd(&pts.y2[i]);
        const __m256d a0 = _mm256_fmadd_pd(F.m[0], x1, _mm256_fmadd_pd(F.m[1], y1, F.m[2]));
        const __m256d a1 = _mm256_fmadd_pd(F.m[3], x1, _mm256_fmadd_pd(F.m[4], y1, F.m[5]));
        const __m256d a2 = _mm256_fmadd_pd(F.m[6], x1, _mm256_fmadd_pd(F.m[7], y1, F.m[8]));
        const __m256d b0 = _mm256_fmadd_pd(F.m[0], x2, _mm256_fmadd_pd(F.m[3], y2, F.m[6]));
        const __m256d b1 = _mm256_fmadd_pd(F.m[1], x2, _mm256_fmadd_pd(F.m[4], y2, F.m[7]));
        const __m256d e = _mm256_fmadd_pd(x2, a0, _mm256_fmadd_pd(y2, a1, a2));
        __m256d denom = _mm256_mul_pd(a0, a0);
        denom = _mm256_fmadd_pd(a1, a1, denom);
        denom = _mm256_fmadd_pd(b0, b0, denom);
        denom = _mm256_fmadd_pd(b1, b1, denom);
        const __m256d positive = _mm256_cmp_pd(denom, _mm256_setzero_pd(), _CMP_GT_OQ);
        const __m256d d = _mm256_div_pd(_mm256_mul_pd(e, e), denom);
        _mm256_storeu_pd(&out[i], _mm256_blendv_pd(_mm256_set1_pd(kInf), d, positive));
    }
    for (; i < n; ++i) {
        const double x1 = pts.x1[i], y1 = pts.y1[i], x2 = pts.x2[i], y2 = pts.y2[i];
        const double a0 = Fm[0] * x1 + Fm[1] * y1 + Fm[2];
        const double a1 = Fm[3] * x1 + Fm[4] * y1 + Fm[5];
        const double a2 = Fm[6] * x1 + Fm[7] * y1 + Fm[8];
        const double b0 = Fm[0] * x2 + Fm[3] * y2 + Fm[6];
        const double b1 = Fm[1] * x2 + Fm[4] * y2 + Fm[7];
        const double e = x2 * a0 + y2 * a1 + a2;
        const double denom = a0 * a0 + a1 * a1 + b0 * b0 + b1 * b1;
        out[i] = denom > 0.0 ? e * e / denom : kInf;
    }
}

// exp(x) for x <= 0. Cody-Waite reduction by ln 2 and a degree-13 Taylor
// polynomial on |r| <= ln(2)/2; inputs below -708 flush to zero.
inline __m256d exp_nonpositive(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d floor_x = _mm256_set1_pd(-708.0);
    const __m256d underflow = _mm256_cmp_pd(x, floor_x, _CMP_LT_OQ);
    x = _mm256_max_pd(x, floor_x);

    const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(k, ln2_hi, x);
    r = _mm256_fnmadd_pd(k, ln2_lo, r);

    static constexpr double c[] = {
        1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
        1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,
        1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,        0.5,
        1.0,                1.0};
    __m256d p = _mm256_set1_pd(c[0]);
    for (int j = 1; j < 14; ++j) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c[j]));

    // 2^k via the exponent field; k is integral in [-1021, 0].
    const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 1.5 * 2^52
    const __m256i ki = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(k, magic)),
                                        _mm256_castpd_si256(magic));
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ki, _mm256_set1_epi64x(1023)), 52);
    const __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
    return _mm256_andnot_pd(underflow, result);
}

void height_consensus(std::span<const double> h, double mu, std::span<double> q) {
    const std::size_t n = h.size();
    const __m256d neg_mu = _mm256_set1_pd(-mu);
    const __m256d lane_offsets = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const __m256d hi = _mm256_set1_pd(h[i]);
        const __m256d self = _mm256_set1_pd(static_cast<double>(i));
        __m256d acc = _mm256_setzero_pd();
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const __m256d d = _mm256_sub_pd(hi, _mm256_loadu_pd(&h[j]));
            const __m256d e = exp_nonpositive(_mm256_mul_pd(neg_mu, _mm256_mul_pd(d, d)));
            const __m256d idx = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(j)), lane_offsets);
            acc = _mm256_add_pd(acc, _mm256_andnot_pd(_mm256_cmp_pd(idx, self, _CMP_EQ_OQ), e));
        }
        double sum = hsum(acc);
        for (; j < n; ++j) {
            if (j == i) continue;
            const double d = h[i] - h[j];
            sum += std::exp(-mu * d * d);
        }
        q[i] = sum;
    }
}

}  // namespace

const KernelTable& avx2_table_impl() {
    static const KernelTable table{"avx2", &symmetric_transfer_sq, &huber_transfer_cost,
                                   &sampson_sq, &height_consensus};
    return table;
}

}  // namespace scalevo::kernels

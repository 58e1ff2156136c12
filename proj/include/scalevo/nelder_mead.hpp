#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>

namespace scalevo {

struct NelderMeadOptions {
    double reflect = 1.0;
    double expand = 2.0;
    double contract = 0.5;
    double shrink = 0.5;
    /// Stop when max f - min f over the simplex <= tolerance * max(1, |f_best|).
    double tolerance = 1e-10;
    int max_iterations = 500;
};

template <std::size_t N>
struct NelderMeadResult {
    std::array<double, N> x{};
    double value = std::numeric_limits<double>::infinity();
    double initial_value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Downhill simplex minimization of f starting from x0 with per-axis initial
/// steps. Non-finite objective values are treated as +inf, so the simplex
/// simply moves away from them. The returned point is the best vertex ever
/// held, so value <= f(x0) always.
template <std::size_t N, typename F>
NelderMeadResult<N> nelder_mead(F&& f, const std::array<double, N>& x0,
                                const std::array<double, N>& step,
                                const NelderMeadOptions& opt = {}) {
    using Point = std::array<double, N>;
    auto eval = [&](const Point& p) {
        const double v = f(p);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::array<Point, N + 1> simplex;
    std::array<double, N + 1> values;
    simplex[0] = x0;
    for (std::size_t i = 0; i < N; ++i) {
        simplex[i + 1] = x0;
        simplex[i + 1][i] += step[i];
    }
    for (std::size_t i = 0; i <= N; ++i) values[i] = eval(simplex[i]);

    NelderMeadResult<N> result;
    result.initial_value = values[0];

    std::array<std::size_t, N + 1> order;
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::array<Point, N + 1> s2;
        std::array<double, N + 1> v2;
        for (std::size_t i = 0; i <= N; ++i) {
            s2[i] = simplex[order[i]];
            v2[i] = values[order[i]];
        }
        simplex = s2;
        values = v2;
    };
    auto combine = [](const Point& a, const Point& b, double t) {
        // a + t (b - a)
        Point p;
        for (std::size_t i = 0; i < N; ++i) p[i] = a[i] + t * (b[i] - a[i]);
        return p;
    };

    int it = 0;
    sort_simplex();
    for (; it < opt.max_iterations; ++it) {
        const double spread = values[N] - values[0];
        if (std::isfinite(spread) &&
            spread <= opt.tolerance * std::max(1.0, std::abs(values[0]))) {
            result.converged = true;
            break;
        }

        Point centroid{};
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t k = 0; k < N; ++k) centroid[k] += simplex[i][k] / static_cast<double>(N);

        const Point xr = combine(centroid, simplex[N], -opt.reflect);
        const double fr = eval(xr);
        if (fr < values[0]) {
            const Point xe = combine(centroid, simplex[N], -opt.reflect * opt.expand);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[N] = xe;
                values[N] = fe;
            } else {
                simplex[N] = xr;
                values[N] = fr;
            }
        } else if (fr < values[N - 1]) {
            simplex[N] = xr;
            values[N] = fr;
        } else {
            const bool outside = fr < values[N];
            const Point xc = outside ? combine(centroid, xr, opt.contract)
                                     : combine(centroid, simplex[N], opt.contract);
            const double fc = eval(xc);
            if (fc < (outside ? fr : values[N])) {
                simplex[N] = xc;
                values[N] = fc;
            } else {
                for (std::size_t i = 1; i <= N; ++i) {
                    simplex[i] = combine(simplex[0], simplex[i], opt.shrink);
                    values[i] = eval(simplex[i]);
                }
            }
        }
        sort_simplex();
    }
    result.iterations = it;
    result.x = simplex[0];
    result.value = values[0];
    return result;
}

}  // namespace scalevo

#pragma once

// Small derivative-free minimizers shared by the witness fallback and the
// model fitters.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <utility>

namespace cvent {

struct Minimum1d {
    double x;
    double f;
};

/// Golden-section search for a minimum of f on [lo, hi].
template <class F>
Minimum1d golden_section(F&& f, double lo, double hi, double x_tol = 1e-12, int max_iter = 500)
{
    constexpr double kInvPhi = 0.6180339887498948482;
    double a = lo;
    double b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < max_iter && std::abs(b - a) > x_tol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? Minimum1d{c, fc} : Minimum1d{d, fd};
}

template <std::size_t N>
struct SimplexResult {
    std::array<double, N> x;
    double f;
    int iterations;
    bool converged;
};

/// Nelder-Mead simplex. `scale` sets the initial simplex edge per coordinate.
template <std::size_t N, class F>
SimplexResult<N> nelder_mead(F&& f, std::array<double, N> x0, std::array<double, N> scale,
                             double f_tol = 1e-14, int max_iter = 20000)
{
    using Point = std::array<double, N>;
    std::array<Point, N + 1> pts;
    std::array<double, N + 1> vals;
    pts[0] = x0;
    for (std::size_t i = 0; i < N; ++i) {
        pts[i + 1] = x0;
        pts[i + 1][i] += scale[i];
    }
    for (std::size_t i = 0; i <= N; ++i) {
        vals[i] = f(pts[i]);
    }

    auto blend = [](const Point& a, const Point& b, double t) {
        Point out;
        for (std::size_t i = 0; i < N; ++i) {
            out[i] = a[i] + t * (b[i] - a[i]);
        }
        return out;
    };

    std::array<std::size_t, N + 1> order;
    int it = 0;
    bool converged = false;
    for (; it < max_iter; ++it) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](auto l, auto r) { return vals[l] < vals[r]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[N - 1];
        if (std::abs(vals[worst] - vals[best]) <= f_tol * (std::abs(vals[best]) + f_tol)) {
            converged = true;
            break;
        }

        Point centroid{};
        for (std::size_t i = 0; i <= N; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < N; ++j) centroid[j] += pts[i][j] / N;
        }

        const Point reflected = blend(centroid, pts[worst], -1.0);
        const double fr = f(reflected);
        if (fr < vals[best]) {
            const Point expanded = blend(centroid, pts[worst], -2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                pts[worst] = expanded;
                vals[worst] = fe;
            } else {
                pts[worst] = reflected;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = reflected;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        const Point contracted = blend(centroid, outside ? reflected : pts[worst], 0.5);
        const double fc = f(contracted);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = contracted;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= N; ++i) {
            if (i == best) continue;
            pts[i] = blend(pts[best], pts[i], 0.5);
            vals[i] = f(pts[i]);
        }
    }
    const auto best = static_cast<std::size_t>(
        std::min_element(vals.begin(), vals.end()) - vals.begin());
    return {pts[best], vals[best], it, converged};
}

}  // namespace cvent

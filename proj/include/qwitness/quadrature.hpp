// quadrature.hpp: adaptive Gauss-Kronrod engine for oscillatory frequency integrals
//
// The integration interval is split at caller-supplied breakpoints, each piece is
// pre-divided into panels so that every oscillation period of the fastest kernel
// gets at least `panels_per_period` panels, and the panel with the largest
// Kronrod-Gauss discrepancy is bisected until the summed estimate meets the
// requested absolute tolerance. The refinement order is fully deterministic.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "qwitness/error.hpp"

namespace qwitness::quad {

struct Options {
    double abs_tol = 1e-9;
    double panels_per_period = 8.0;
    std::size_t max_panels = 4'000'000;
};

template <std::size_t N>
struct Result {
    std::array<double, N> value{};
    double error = 0.0;
    std::size_t evaluations = 0;
};

namespace detail {

// 15-point Kronrod nodes on [-1,1] (non-negative half) and weights; odd indices are Gauss-7 nodes.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <std::size_t N>
struct Panel {
    double a, b;
    std::array<double, N> value;
    double error;
};

template <std::size_t N, class F>
Panel<N> gauss_kronrod(F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    std::array<double, N> kron{};
    std::array<double, N> gauss{};

    const std::array<double, N> fc = f(center);
    for (std::size_t k = 0; k < N; ++k) {
        kron[k] = fc[k] * kWgk[7];
        gauss[k] = fc[k] * kWg[3];
    }
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const std::array<double, N> f1 = f(center - dx);
        const std::array<double, N> f2 = f(center + dx);
        for (std::size_t k = 0; k < N; ++k) {
            const double sum = f1[k] + f2[k];
            kron[k] += kWgk[j] * sum;
            if (j % 2 == 1) gauss[k] += kWg[j / 2] * sum;
        }
    }
    Panel<N> p{a, b, {}, 0.0};
    for (std::size_t k = 0; k < N; ++k) {
        p.value[k] = kron[k] * half;
        p.error = std::max(p.error, std::abs((kron[k] - gauss[k]) * half));
    }
    return p;
}

} // namespace detail

/// Integrates a vector-valued f over [breakpoints.front(), breakpoints.back()].
/// `max_angular_freq` is the largest angular frequency (in the integration
/// variable) of the oscillatory kernel; it sets the initial panel density.
template <std::size_t N, class F>
Result<N> integrate(F&& f, std::vector<double> breakpoints, double max_angular_freq, const Options& opt = {}) {
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    Result<N> out;
    if (breakpoints.size() < 2) return out;

    using Panel = detail::Panel<N>;
    auto cmp = [](const Panel& x, const Panel& y) {
        if (x.error != y.error) return x.error < y.error;
        return x.a > y.a;
    };
    std::vector<Panel> panels;

    const double period = max_angular_freq > 0.0 ? 2.0 * std::numbers::pi / max_angular_freq : 0.0;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const double a = breakpoints[i];
        const double b = breakpoints[i + 1];
        std::size_t count = 1;
        if (period > 0.0) count = static_cast<std::size_t>(std::ceil((b - a) / period * opt.panels_per_period));
        count = std::max<std::size_t>(count, 1);
        if (count > opt.max_panels)
            throw QuadratureError("quadrature: oscillation too fast for panel budget", INFINITY);
        const double h = (b - a) / static_cast<double>(count);
        for (std::size_t j = 0; j < count; ++j) {
            const double lo = a + h * static_cast<double>(j);
            const double hi = (j + 1 == count) ? b : lo + h;
            panels.push_back(detail::gauss_kronrod<N>(f, lo, hi));
        }
    }
    out.evaluations = panels.size() * 15;

    auto total_error = [&] {
        double e = 0.0;
        for (const auto& p : panels) e += p.error;
        return e;
    };
    double err = total_error();
    if (err > opt.abs_tol) {
        std::priority_queue<Panel, std::vector<Panel>, decltype(cmp)> heap(cmp, std::move(panels));
        panels.clear();
        while (err > opt.abs_tol) {
            if (heap.size() >= opt.max_panels)
                throw QuadratureError("quadrature: tolerance " + std::to_string(opt.abs_tol) +
                                          " not reached, achieved estimate " + std::to_string(err),
                                      err);
            const Panel worst = heap.top();
            heap.pop();
            const double mid = 0.5 * (worst.a + worst.b);
            if (!(mid > worst.a && mid < worst.b))
                throw QuadratureError("quadrature: panel underflow, achieved estimate " + std::to_string(err), err);
            Panel left = detail::gauss_kronrod<N>(f, worst.a, mid);
            Panel right = detail::gauss_kronrod<N>(f, mid, worst.b);
            out.evaluations += 30;
            err += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }
        while (!heap.empty()) {
            panels.push_back(heap.top());
            heap.pop();
        }
        std::sort(panels.begin(), panels.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
        err = total_error();
    }

    for (const auto& p : panels)
        for (std::size_t k = 0; k < N; ++k) out.value[k] += p.value[k];
    out.error = err;
    if (!std::isfinite(err))
        throw QuadratureError("quadrature: non-finite integrand", err);
    return out;
}

} // namespace qwitness::quad

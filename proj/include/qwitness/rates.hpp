// rates.hpp: time-dependent RWA decay rates, their Markovian limits, TCL2 coefficients,
// and the tabulated RateTable consumed by the propagator.
//
// Time is measured in 1/omega throughout the API; only the CSV export rescales
// it to periods 2 pi/omega.

#pragma once

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "qwitness/bath.hpp"
#include "qwitness/error.hpp"
#include "qwitness/parallel.hpp"
#include "qwitness/quadrature.hpp"

namespace qwitness {

/// gamma multiplies D_{a^dag n}, Gamma multiplies D_{a^n}, kappa the generalized pair.
struct Rates {
    double gamma = 0.0;
    double Gamma = 0.0;
    double kappa = 0.0;
};

struct MarkovianRates {
    double gamma_inf = 0.0;
    double Gamma_inf = 0.0;
    double kappa_inf = 0.0;
};

struct TclCoefficients {
    double Lambda = 0.0;  // int ds C^Im(t,s) cos[n omega (t-s)]
    double Gamma = 0.0;   // int ds C^Im(t,s) sin[n omega (t-s)]
    double gamma = 0.0;   // int ds C^Re(t,s) cos[n omega (t-s)]
    double lambda = 0.0;  // int ds C^Re(t,s) sin[n omega (t-s)]
};

namespace detail {

inline void require_order(int n, int m) {
    if ((n != 1 && n != 2) || (m != 1 && m != 2))
        throw DomainError("rates: exchange orders n, m must be 1 or 2");
}

inline double sinc(double z) {
    if (std::abs(z) < 1e-4) return 1.0 - z * z / 6.0;
    return std::sin(z) / z;
}

// Omega-kernels of the rate integrals at detuning x = n omega - m w.
//   sinc kernel  sin(x t)/x
//   kappa kernel [sin((n omega + m w) t) - sin(2 m w t)]/x = 2 cos(c t) sin(x t/2)/x, c = (n omega + 3 m w)/2
// Both stay finite at x = 0: t and t cos(2 n omega t) respectively.
struct Kernels {
    double sinc_kernel;
    double kappa_kernel;
};

inline Kernels rate_kernels(int n, int m, double omega, double w, double t) {
    const double x = n * omega - m * w;
    const double c = 0.5 * (n * omega + 3.0 * m * w);
    return {t * sinc(x * t), t * std::cos(c * t) * sinc(0.5 * x * t)};
}

// d/dt of the kernels above.
inline Kernels rate_kernel_slopes(int n, int m, double omega, double w, double t) {
    const double x = n * omega - m * w;
    const double c = 0.5 * (n * omega + 3.0 * m * w);
    return {std::cos(x * t),
            -c * t * std::sin(c * t) * sinc(0.5 * x * t) + std::cos(c * t) * std::cos(0.5 * x * t)};
}

template <class KernelFn>
Rates rate_integral(int n, int m, const BathSpec& bath, const SpectralDensity& J, double t, const quad::Options& opt,
                    KernelFn kernel) {
    require_order(n, m);
    bath.validate();
    J.validate();
    require_integrable(bath, J);
    const double omega = bath.omega_ref;
    auto f = [&](double w) -> std::array<double, 3> {
        const double jw = spectral_density(J, w);
        if (jw == 0.0) return {0.0, 0.0, 0.0};
        const Moments mo = moments(bath, w);
        const Kernels k = kernel(n, m, omega, w, t);
        return {jw * mo.N * k.sinc_kernel, jw * mo.Nprime * k.sinc_kernel, jw * mo.M * k.kappa_kernel};
    };
    std::vector<double> breaks{J.quad_lower(), J.quad_upper()};
    const double resonance = n * omega / m;
    if (resonance > breaks.front() && resonance < breaks.back()) breaks.push_back(resonance);
    const double freq = std::max(2.0 * m * t, 1.0);
    const auto res = quad::integrate<3>(f, std::move(breaks), freq, opt);
    const double pre = 1.0 / static_cast<double>(1 << n);
    return {pre * res.value[0], pre * res.value[1], pre * res.value[2]};
}

} // namespace detail

/// gamma_{n,m}(t), Gamma_{n,m}(t), kappa_{n,m}(t) including the 1/2^n prefactor.
inline Rates decay_rates(int n, int m, const BathSpec& bath, const SpectralDensity& J, double t,
                         const quad::Options& opt = {}) {
    if (t < 0.0) throw DomainError("decay_rates: t must be >= 0");
    if (t == 0.0) {
        detail::require_order(n, m);
        return {};
    }
    return detail::rate_integral(n, m, bath, J, t, opt, detail::rate_kernels);
}

/// Time derivatives of the three rates.
inline Rates decay_rate_slopes(int n, int m, const BathSpec& bath, const SpectralDensity& J, double t,
                               const quad::Options& opt = {}) {
    if (t < 0.0) throw DomainError("decay_rate_slopes: t must be >= 0");
    return detail::rate_integral(n, m, bath, J, t, opt, detail::rate_kernel_slopes);
}

/// t -> infinity limit through sin(x t)/x -> pi delta(x): evaluated at Omega = n omega/m with Jacobian 1/m.
inline MarkovianRates markovian_rates(int n, int m, const BathSpec& bath, const SpectralDensity& J) {
    detail::require_order(n, m);
    bath.validate();
    J.validate();
    const double w = n * bath.omega_ref / m;
    const double scale = std::numbers::pi / m / static_cast<double>(1 << n) * spectral_density(J, w);
    const Moments mo = moments(bath, w);
    return {scale * mo.N, scale * mo.Nprime, 0.0};
}

/// The four TCL2 coefficients as s-integrals over [0, t] of the correlator.
inline TclCoefficients tcl_coefficients(int n, int m, const BathSpec& bath, const SpectralDensity& J, double t,
                                        const quad::Options& opt = {}) {
    detail::require_order(n, m);
    if (t < 0.0) throw DomainError("tcl_coefficients: t must be >= 0");
    if (t == 0.0) return {};
    const double omega = bath.omega_ref;
    quad::Options inner = opt;
    inner.abs_tol = opt.abs_tol / std::max(1.0, t) * 0.1;
    auto f = [&](double s) -> std::array<double, 4> {
        const std::complex<double> c = correlator(bath, J, t, s, inner);
        const double cs = std::cos(n * omega * (t - s));
        const double sn = std::sin(n * omega * (t - s));
        return {c.imag() * cs, c.imag() * sn, c.real() * cs, c.real() * sn};
    };
    const double freq = n * omega + 2.0 * m * J.omega_uv;
    const auto res = quad::integrate<4>(f, {0.0, t}, freq, opt);
    return {res.value[0], res.value[1], res.value[2], res.value[3]};
}

// ------------------------------------------------------------------ table

namespace detail {

// Second derivatives of the clamped cubic spline through (x, y) with end slopes d0, dn.
inline std::vector<double> clamped_spline(const std::vector<double>& x, const std::vector<double>& y, double d0,
                                          double dn) {
    const std::size_t n = x.size();
    std::vector<double> a(n), b(n), c(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0) {
            const double h = x[1] - x[0];
            b[i] = h / 3.0;
            c[i] = h / 6.0;
            r[i] = (y[1] - y[0]) / h - d0;
        } else if (i + 1 == n) {
            const double h = x[n - 1] - x[n - 2];
            a[i] = h / 6.0;
            b[i] = h / 3.0;
            r[i] = dn - (y[n - 1] - y[n - 2]) / h;
        } else {
            const double hl = x[i] - x[i - 1];
            const double hr = x[i + 1] - x[i];
            a[i] = hl / 6.0;
            b[i] = (hl + hr) / 3.0;
            c[i] = hr / 6.0;
            r[i] = (y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl;
        }
    }
    // Thomas algorithm
    for (std::size_t i = 1; i < n; ++i) {
        const double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        r[i] -= w * r[i - 1];
    }
    std::vector<double> m2(n);
    m2[n - 1] = r[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m2[i] = (r[i] - c[i] * m2[i + 1]) / b[i];
    return m2;
}

} // namespace detail

class RateTable {
public:
    RateTable(int n, int m, std::vector<double> times, std::vector<double> gamma, std::vector<double> Gamma,
              std::vector<double> kappa, Rates slope_start, Rates slope_end)
        : n_(n), m_(m), t_(std::move(times)), gamma_(std::move(gamma)), Gamma_(std::move(Gamma)),
          kappa_(std::move(kappa)) {
        detail::require_order(n, m);
        const std::size_t len = t_.size();
        if (len < 2) throw DomainError("RateTable: need at least two grid points");
        if (gamma_.size() != len || Gamma_.size() != len || kappa_.size() != len)
            throw DomainError("RateTable: arrays must have equal length");
        if (t_.front() != 0.0) throw DomainError("RateTable: time grid must start at 0");
        for (std::size_t i = 1; i < len; ++i)
            if (!(t_[i] > t_[i - 1])) throw DomainError("RateTable: time grid must be strictly increasing");
        d2_gamma_ = detail::clamped_spline(t_, gamma_, slope_start.gamma, slope_end.gamma);
        d2_Gamma_ = detail::clamped_spline(t_, Gamma_, slope_start.Gamma, slope_end.Gamma);
        d2_kappa_ = detail::clamped_spline(t_, kappa_, slope_start.kappa, slope_end.kappa);
    }

    int n() const noexcept { return n_; }
    int m() const noexcept { return m_; }
    double t_max() const noexcept { return t_.back(); }
    std::size_t size() const noexcept { return t_.size(); }
    const std::vector<double>& times() const noexcept { return t_; }
    const std::vector<double>& gamma() const noexcept { return gamma_; }
    const std::vector<double>& Gamma() const noexcept { return Gamma_; }
    const std::vector<double>& kappa() const noexcept { return kappa_; }

    /// Spline-interpolated rates; extrapolation is refused.
    Rates at(double t) const {
        if (t < 0.0 || t > t_.back() * (1.0 + 1e-12))
            throw DomainError(fmt::format("RateTable: t={} outside tabulated range [0, {}]", t, t_.back()));
        t = std::min(t, t_.back());
        std::size_t hi = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin());
        hi = std::clamp<std::size_t>(hi, 1, t_.size() - 1);
        const std::size_t lo = hi - 1;
        const double h = t_[hi] - t_[lo];
        const double A = (t_[hi] - t) / h;
        const double B = 1.0 - A;
        const double C = (A * A * A - A) * h * h / 6.0;
        const double D = (B * B * B - B) * h * h / 6.0;
        auto eval = [&](const std::vector<double>& y, const std::vector<double>& d2) {
            return A * y[lo] + B * y[hi] + C * d2[lo] + D * d2[hi];
        };
        return {eval(gamma_, d2_gamma_), eval(Gamma_, d2_Gamma_), eval(kappa_, d2_kappa_)};
    }

    /// Sign changes of kappa, located by bisection on the interpolant.
    std::vector<double> kappa_zero_crossings(double t_limit = INFINITY) const {
        std::vector<double> roots;
        const double scale = *std::max_element(kappa_.begin(), kappa_.end(), [](double a, double b) {
            return std::abs(a) < std::abs(b);
        });
        const double floor = std::abs(scale) * 1e-12;
        for (std::size_t i = 1; i < t_.size() && t_[i - 1] < t_limit; ++i) {
            double lo = t_[i - 1], hi = t_[i];
            double flo = at(lo).kappa, fhi = at(hi).kappa;
            if (std::abs(flo) <= floor || std::abs(fhi) <= floor) continue;
            if ((flo < 0.0) == (fhi < 0.0)) continue;
            for (int it = 0; it < 100 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = at(mid).kappa;
                if ((fm < 0.0) == (flo < 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            const double root = 0.5 * (lo + hi);
            if (root <= t_limit) roots.push_back(root);
        }
        return roots;
    }

    /// CSV with columns t, gamma, Gamma, kappa; t in periods 2 pi/omega, rates in omega.
    void write_csv(std::ostream& os, double omega = 1.0) const {
        os << "t,gamma,Gamma,kappa\n";
        for (std::size_t i = 0; i < t_.size(); ++i)
            os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", t_[i] * omega / (2.0 * std::numbers::pi),
                              gamma_[i], Gamma_[i], kappa_[i]);
    }

private:
    int n_, m_;
    std::vector<double> t_, gamma_, Gamma_, kappa_;
    std::vector<double> d2_gamma_, d2_Gamma_, d2_kappa_;
};

struct TabulationOptions {
    quad::Options quad{};
    double interpolation_tol = 1e-6;
    std::size_t check_points = 10;
    unsigned check_seed = 20240917u;
};

/// Uniform-grid table on [0, t_max]; the interpolant is verified against direct
/// quadrature at randomly chosen cell midpoints.
inline RateTable tabulate_rates(int n, int m, const BathSpec& bath, const SpectralDensity& J, double t_max,
                                std::size_t grid_points, const TabulationOptions& opt = {}) {
    detail::require_order(n, m);
    if (!(t_max > 0.0)) throw DomainError("tabulate_rates: t_max must be > 0");
    if (grid_points < 2) throw DomainError("tabulate_rates: need at least 2 grid points");
    bath.validate();
    J.validate();

    std::vector<double> t(grid_points), g(grid_points), G(grid_points), k(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i)
        t[i] = (i + 1 == grid_points) ? t_max : t_max * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    parallel_for(grid_points, [&](std::size_t i) {
        const Rates r = decay_rates(n, m, bath, J, t[i], opt.quad);
        g[i] = r.gamma;
        G[i] = r.Gamma;
        k[i] = r.kappa;
    });
    const Rates s0 = decay_rate_slopes(n, m, bath, J, 0.0, opt.quad);
    const Rates s1 = decay_rate_slopes(n, m, bath, J, t_max, opt.quad);
    RateTable table(n, m, std::move(t), std::move(g), std::move(G), std::move(k), s0, s1);

    std::mt19937 rng(opt.check_seed);
    std::uniform_int_distribution<std::size_t> cell(0, grid_points - 2);
    std::vector<double> probes(opt.check_points);
    for (auto& p : probes) {
        const std::size_t i = cell(rng);
        p = 0.5 * (table.times()[i] + table.times()[i + 1]);
    }
    std::vector<double> deviation(probes.size());
    parallel_for(probes.size(), [&](std::size_t i) {
        const Rates direct = decay_rates(n, m, bath, J, probes[i], opt.quad);
        const Rates interp = table.at(probes[i]);
        deviation[i] = std::max({std::abs(direct.gamma - interp.gamma), std::abs(direct.Gamma - interp.Gamma),
                                 std::abs(direct.kappa - interp.kappa)});
    });
    const double worst = deviation.empty() ? 0.0 : *std::max_element(deviation.begin(), deviation.end());
    if (worst > opt.interpolation_tol)
        throw TabulationError(fmt::format("tabulate_rates: grid too coarse, midpoint deviation {:.3e} > {:.1e}",
                                          worst, opt.interpolation_tol),
                              worst);
    return table;
}

} // namespace qwitness

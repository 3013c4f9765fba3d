// bath.hpp: spectral density, reservoir states, second moments and two-time correlators

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "qwitness/error.hpp"
#include "qwitness/quadrature.hpp"

namespace qwitness {

enum class SpectralForm { soft_double_cutoff, exp_uv_only };
enum class BathKind { thermal, squeezed_vacuum };

inline std::string_view to_string(SpectralForm f) {
    return f == SpectralForm::soft_double_cutoff ? "soft_double_cutoff" : "exp_uv_only";
}
inline std::string_view to_string(BathKind k) { return k == BathKind::thermal ? "thermal" : "squeezed_vacuum"; }

/// Ohmic J(nu) = A nu exp(-Omega_IR/nu - nu/Omega_UV), or without the IR factor.
/// Frequencies are in units of the system frequency omega.
struct SpectralDensity {
    double A = 0.1;
    double omega_ir = 0.5;
    double omega_uv = 2.0;
    SpectralForm form = SpectralForm::soft_double_cutoff;

    void validate() const {
        if (!(A > 0.0)) throw DomainError("SpectralDensity: A must be > 0");
        if (!(omega_uv > 0.0)) throw DomainError("SpectralDensity: omega_uv must be > 0");
        if (form == SpectralForm::soft_double_cutoff && !(omega_ir > 0.0 && omega_ir < omega_uv))
            throw DomainError("SpectralDensity: need 0 < omega_ir < omega_uv");
    }

    // Frequency window used by every Omega quadrature. With the IR factor the lower edge
    // keeps the exponentially suppressed region out of the sums; without it the window starts
    // at 0. The upper edge sits where exp(-nu/Omega_UV) ~ 2e-9.
    double quad_lower() const { return form == SpectralForm::soft_double_cutoff ? omega_ir / 100.0 : 0.0; }
    double quad_upper() const { return 20.0 * omega_uv; }
};

inline double spectral_density(const SpectralDensity& J, double nu) {
    if (nu < 0.0) throw DomainError("spectral_density: negative frequency");
    if (nu == 0.0) return 0.0;
    double exponent = -nu / J.omega_uv;
    if (J.form == SpectralForm::soft_double_cutoff) exponent -= J.omega_ir / nu;
    return J.A * nu * std::exp(exponent);
}

/// Reservoir state. Squeezing profile r(Omega) = r0 (Omega/omega_ref)^alpha_exp; theta is fixed to 0.
struct BathSpec {
    BathKind kind = BathKind::thermal;
    int m = 1;
    double beta = std::numeric_limits<double>::infinity();
    double r0 = 1.0;
    double alpha_exp = 0.0;
    double theta = 0.0;
    double omega_ref = 1.0;

    void validate() const {
        if (m != 1 && m != 2) throw DomainError("BathSpec: m must be 1 or 2");
        if (theta != 0.0) throw DomainError("BathSpec: only theta = 0 is supported");
        if (kind == BathKind::thermal && !(beta > 0.0)) throw DomainError("BathSpec: beta must be > 0");
        if (kind == BathKind::squeezed_vacuum && !(r0 >= 0.0)) throw DomainError("BathSpec: r0 must be >= 0");
        if (!(omega_ref > 0.0)) throw DomainError("BathSpec: omega_ref must be > 0");
    }

    double squeeze(double omega) const {
        if (alpha_exp == 0.0) return r0;
        return r0 * std::pow(omega / omega_ref, alpha_exp);
    }
};

struct Moments {
    double M = 0.0;
    double N = 0.0;
    double Nprime = 0.0;
};

/// Mean thermal occupation 1/(e^{beta Omega} - 1); zero at beta = inf.
inline double thermal_occupation(double beta, double omega) {
    if (std::isinf(beta)) return 0.0;
    return 1.0 / std::expm1(beta * omega);
}

inline Moments moments(const BathSpec& bath, double omega) {
    if (!(omega > 0.0)) throw DomainError("moments: frequency must be > 0");
    if (bath.kind == BathKind::thermal) {
        const double nb = thermal_occupation(bath.beta, omega);
        if (bath.m == 1) return {0.0, nb, nb + 1.0};
        return {0.0, 0.5 * nb * (nb - 1.0), 0.5 * (nb * (nb + 3.0) + 2.0)};
    }
    const double r = bath.squeeze(omega);
    const double s2 = std::sinh(r) * std::sinh(r);
    if (bath.m == 1) return {-0.5 * std::sinh(2.0 * r), s2, s2 + 1.0};
    const double sh2r = std::sinh(2.0 * r);
    return {0.375 * sh2r * sh2r, 0.5 * s2 * (s2 - 1.0), 0.5 * (s2 * (s2 + 3.0) + 2.0)};
}

namespace detail {

// Real and imaginary Omega-integrands of C_m(t, t') at frequency w (theta = 0).
inline std::array<double, 2> correlator_integrand(const BathSpec& bath, const SpectralDensity& J, double w,
                                                  double t, double tp) {
    const double jw = spectral_density(J, w);
    if (jw == 0.0) return {0.0, 0.0};
    const double diff = t - tp;
    const double sum = t + tp;
    if (bath.kind == BathKind::thermal) {
        // u = e^{-beta w}: coth(x/2) = (1+u)/(1-u), csch^2(x/2)(2cosh x - 1)/4 = (1-u+u^2)/(1-u)^2
        const double u = std::isinf(bath.beta) ? 0.0 : std::exp(-bath.beta * w);
        const double one_minus_u = std::isinf(bath.beta) ? 1.0 : -std::expm1(-bath.beta * w);
        const double coth = (1.0 + u) / one_minus_u;
        if (bath.m == 1) return {jw * coth * std::cos(w * diff), -jw * std::sin(w * diff)};
        const double even = (1.0 - u + u * u) / (one_minus_u * one_minus_u);
        return {jw * even * std::cos(2.0 * w * diff), -jw * coth * std::sin(2.0 * w * diff)};
    }
    const double r = bath.squeeze(w);
    if (bath.m == 1) {
        return {jw * (std::cos(w * diff) * std::cosh(2.0 * r) - std::cos(w * sum) * std::sinh(2.0 * r)),
                -jw * std::sin(w * diff)};
    }
    const double sh2r = std::sinh(2.0 * r);
    return {jw * (0.125 * std::cos(2.0 * w * diff) * (7.0 + std::cosh(4.0 * r)) -
                  0.75 * std::cos(2.0 * w * sum) * sh2r * sh2r),
            -jw * std::sin(2.0 * w * diff) * std::cosh(2.0 * r)};
}

} // namespace detail

/// Without the IR factor, a squeezing profile that grows as Omega -> 0 makes every
/// Omega integral diverge at the lower edge.
inline void require_integrable(const BathSpec& bath, const SpectralDensity& J) {
    if (J.form == SpectralForm::exp_uv_only && bath.kind == BathKind::squeezed_vacuum && bath.alpha_exp < 0.0 &&
        bath.r0 > 0.0)
        throw DomainError("exp_uv_only spectral density with alpha_exp < 0: Omega integrals diverge at 0");
}

/// Two-time bath correlator C_m(t, t') as a continuum integral over Omega.
/// The squeezed m = 1 form carries a minus sign on the (t + t') term.
inline std::complex<double> correlator(const BathSpec& bath, const SpectralDensity& J, double t, double tp,
                                       const quad::Options& opt = {}) {
    if (t < 0.0 || tp < 0.0) throw DomainError("correlator: times must be >= 0");
    bath.validate();
    J.validate();
    require_integrable(bath, J);
    const double freq = bath.m * (t + tp);
    auto f = [&](double w) { return detail::correlator_integrand(bath, J, w, t, tp); };
    const auto res = quad::integrate<2>(f, {J.quad_lower(), J.quad_upper()}, std::max(freq, 1.0), opt);
    return {res.value[0], res.value[1]};
}

} // namespace qwitness

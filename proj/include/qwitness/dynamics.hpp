// dynamics.hpp: time-local RWA master equation and its adaptive propagation
//
//   d rho/dt = -i[omega a^dag a, rho] + gamma(t) D_{a^dag n} rho + Gamma(t) D_{a^n} rho
//              + kappa(t) (D'_{a^n} rho + D'_{a^dag n} rho)
//
// a^n is a shifted diagonal on the truncated space, so every dissipator term is
// evaluated elementwise in O(d^2). Propagation runs in the frame co-rotating with
// omega a^dag a, where the standard dissipators are unchanged and the generalized
// pair picks up the phases exp(-/+ 2 i n omega t); states enter and leave in the
// lab (Schroedinger) frame.

#pragma once

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <variant>
#include <vector>

#include "qwitness/error.hpp"
#include "qwitness/hilbert.hpp"
#include "qwitness/rates.hpp"

namespace qwitness {

struct OdeOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double initial_step = 1e-2;
    std::size_t max_steps = 10'000'000;
};

/// Conservation record of one or more propagations.
struct EvolveDiagnostics {
    double max_trace_drift = 0.0;        // |Tr rho(t) - Tr rho(t0)| over accepted steps
    double max_hermiticity_drift = 0.0;  // max |rho - rho^dag| before any re-Hermitization
    double min_eigenvalue = std::numeric_limits<double>::infinity();
    std::size_t steps = 0;
    std::size_t rejected = 0;
    std::size_t renormalized = 0;
    std::size_t negativity_flags = 0;  // evolutions ending with an eigenvalue below -1e-6

    void merge(const EvolveDiagnostics& o) {
        max_trace_drift = std::max(max_trace_drift, o.max_trace_drift);
        max_hermiticity_drift = std::max(max_hermiticity_drift, o.max_hermiticity_drift);
        min_eigenvalue = std::min(min_eigenvalue, o.min_eigenvalue);
        steps += o.steps;
        rejected += o.rejected;
        renormalized += o.renormalized;
        negativity_flags += o.negativity_flags;
    }
};

/// Called after every accepted step with the lab-frame state.
using TrajectoryObserver = std::function<void(double t, const Matrix& rho)>;

class Propagator {
public:
    using RateSource = std::variant<std::shared_ptr<const RateTable>, MarkovianRates>;

    Propagator(FockSpace space, int n, RateSource rates, double omega = 1.0, OdeOptions ode = {})
        : space_(space), n_(n), rates_(std::move(rates)), omega_(omega), ode_(ode) {
        if (n != 1 && n != 2) throw DomainError("Propagator: n must be 1 or 2");
        if (auto* table = std::get_if<std::shared_ptr<const RateTable>>(&rates_)) {
            if (!*table) throw DomainError("Propagator: null rate table");
            if ((*table)->n() != n) throw DomainError("Propagator: rate table built for a different n");
        }
        if (!(ode_.rel_tol > 0.0) || !(ode_.abs_tol > 0.0)) throw DomainError("Propagator: tolerances must be > 0");
        const int d = space_.dim();
        coef_.assign(d, 0.0);
        for (int i = 0; i + n < d; ++i) {
            double prod = 1.0;
            for (int k = 1; k <= n; ++k) prod *= i + k;
            coef_[i] = std::sqrt(prod);
        }
    }

    const FockSpace& space() const noexcept { return space_; }
    int n() const noexcept { return n_; }
    double omega() const noexcept { return omega_; }
    const OdeOptions& ode() const noexcept { return ode_; }
    const RateSource& rate_source() const noexcept { return rates_; }
    bool is_markovian() const noexcept { return std::holds_alternative<MarkovianRates>(rates_); }

    double t_max() const noexcept {
        if (auto* table = std::get_if<std::shared_ptr<const RateTable>>(&rates_)) return (*table)->t_max();
        return std::numeric_limits<double>::infinity();
    }

    Rates rates_at(double t) const {
        if (auto* table = std::get_if<std::shared_ptr<const RateTable>>(&rates_)) return (*table)->at(t);
        const auto& mk = std::get<MarkovianRates>(rates_);
        return {mk.gamma_inf, mk.Gamma_inf, mk.kappa_inf};
    }

    /// Generator applied to rho. `phase` multiplies D'_{a^n} (its conjugate multiplies
    /// D'_{a^dag n}); `with_hamiltonian` adds -i[omega a^dag a, rho].
    void apply_generator(const Rates& r, complex phase, bool with_hamiltonian, const Matrix& rho, Matrix& out) const {
        const int d = space_.dim();
        const int n = n_;
        const auto c = [&](int i) { return (i >= 0 && i < d) ? coef_[i] : 0.0; };
        const auto in = [&](int i) { return i >= 0 && i < d; };
        const auto lowered = [&](int j) { return j >= n ? coef_[j - n] * coef_[j - n] : 0.0; };  // (L^dag L)_jj
        const auto raised = [&](int j) { return coef_[j] * coef_[j]; };                          // (L L^dag)_jj
        const complex kp = r.kappa * phase;
        const complex km = r.kappa * std::conj(phase);
        out.resize(d, d);
        for (int j = 0; j < d; ++j) {
            for (int i = 0; i < d; ++i) {
                const complex rij = rho(i, j);
                complex v = 0.0;
                // Gamma D_L, L = a^n
                complex dl = -(lowered(i) + lowered(j)) * rij;
                if (in(i + n) && in(j + n)) dl += 2.0 * c(i) * c(j) * rho(i + n, j + n);
                // gamma D_{L^dag}
                complex dld = -(raised(i) + raised(j)) * rij;
                if (i >= n && j >= n) dld += 2.0 * c(i - n) * c(j - n) * rho(i - n, j - n);
                v += r.Gamma * dl + r.gamma * dld;
                if (r.kappa != 0.0) {
                    // D'_L = 2 L rho L - L L rho - rho L L
                    complex g = 0.0;
                    if (in(i + n) && j >= n) g += 2.0 * c(i) * c(j - n) * rho(i + n, j - n);
                    if (in(i + 2 * n)) g -= c(i) * c(i + n) * rho(i + 2 * n, j);
                    if (j >= 2 * n) g -= c(j - 2 * n) * c(j - n) * rho(i, j - 2 * n);
                    // D'_{L^dag} = 2 L^dag rho L^dag - L^dag L^dag rho - rho L^dag L^dag
                    complex h = 0.0;
                    if (i >= n && in(j + n)) h += 2.0 * c(i - n) * c(j) * rho(i - n, j + n);
                    if (i >= 2 * n) h -= c(i - n) * c(i - 2 * n) * rho(i - 2 * n, j);
                    if (in(j + 2 * n)) h -= c(j + n) * c(j) * rho(i, j + 2 * n);
                    v += kp * g + km * h;
                }
                if (with_hamiltonian) v += complex(0.0, -omega_ * (i - j)) * rij;
                out(i, j) = v;
            }
        }
    }

private:
    FockSpace space_;
    int n_;
    RateSource rates_;
    double omega_;
    OdeOptions ode_;
    std::vector<double> coef_;  // coef_[i] = (a^n)_{i, i+n}
};

/// Lab-frame right-hand side of the master equation at time t.
inline Matrix liouvillian_apply(const Propagator& prop, const Matrix& rho, double t) {
    const int d = prop.space().dim();
    if (rho.rows() != d || rho.cols() != d)
        throw DomainError(fmt::format("liouvillian_apply: expected {}x{} matrix", d, d));
    Matrix out;
    prop.apply_generator(prop.rates_at(t), complex(1.0, 0.0), true, rho, out);
    return out;
}

namespace detail {

// Lab <-> rotating frame: rho_lab_ij = rho_rot_ij exp(-i omega (i-j) t).
inline void rotate_frame(Matrix& m, double omega, double t, int sign) {
    const int d = static_cast<int>(m.rows());
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            if (i != j) m(i, j) *= std::polar(1.0, sign * omega * (i - j) * t);
}

inline double error_norm(const Matrix& err, const Matrix& y0, const Matrix& y1, const OdeOptions& opt) {
    double acc = 0.0;
    const auto count = static_cast<double>(err.size());
    for (Eigen::Index k = 0; k < err.size(); ++k) {
        const double scale = opt.abs_tol + opt.rel_tol * std::max(std::abs(y0.data()[k]), std::abs(y1.data()[k]));
        const double e = std::abs(err.data()[k]) / scale;
        acc += e * e;
    }
    return std::sqrt(acc / count);
}

} // namespace detail

/// Applies the propagation map Lambda_{t0 -> t1} to an arbitrary operator (linear,
/// no renormalization). Diagnostics are accumulated into `diag`.
inline Matrix propagate(const Propagator& prop, Matrix x, double t0, double t1, EvolveDiagnostics& diag,
                        const TrajectoryObserver& observer = {}) {
    const int d = prop.space().dim();
    if (x.rows() != d || x.cols() != d) throw DomainError(fmt::format("propagate: expected {}x{} matrix", d, d));
    if (!(t0 >= 0.0) || !(t1 >= t0)) throw DomainError("propagate: need 0 <= t0 <= t1");
    if (t1 > prop.t_max() * (1.0 + 1e-12))
        throw DomainError(fmt::format("propagate: t1={} beyond tabulated rates (t_max={})", t1, prop.t_max()));
    if (t1 == t0) return x;

    const OdeOptions& opt = prop.ode();
    const double omega = prop.omega();
    const int n = prop.n();
    detail::rotate_frame(x, omega, t0, +1);

    const complex tr0 = x.trace();
    auto rhs = [&](double t, const Matrix& y, Matrix& out) {
        const complex phase = std::polar(1.0, -2.0 * n * omega * t);
        prop.apply_generator(prop.rates_at(std::min(t, t1)), phase, false, y, out);
    };

    // Dormand-Prince 5(4) with FSAL
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    Matrix k1, k2, k3, k4, k5, k6, k7, tmp, ynew, err;
    double t = t0;
    double h = std::min(opt.initial_step, t1 - t0);
    rhs(t, x, k1);
    std::size_t steps = 0;
    while (t < t1) {
        if (steps++ > opt.max_steps) throw IntegrationError("propagate: step budget exhausted");
        const bool last = (t + h >= t1);
        if (last) h = t1 - t;
        tmp = x + h * a21 * k1;
        rhs(t + c2 * h, tmp, k2);
        tmp = x + h * (a31 * k1 + a32 * k2);
        rhs(t + c3 * h, tmp, k3);
        tmp = x + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * h, tmp, k4);
        tmp = x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h, tmp, k5);
        tmp = x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        const double t_next = last ? t1 : t + h;
        rhs(t_next, tmp, k6);
        ynew = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t_next, ynew, k7);
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double en = detail::error_norm(err, x, ynew, opt);
        if (!std::isfinite(en)) throw IntegrationError("propagate: non-finite error estimate");

        if (en <= 1.0) {
            t = t_next;
            x.swap(ynew);
            k1.swap(k7);
            ++diag.steps;
            diag.max_trace_drift = std::max(diag.max_trace_drift, std::abs(x.trace() - tr0));
            diag.max_hermiticity_drift = std::max(diag.max_hermiticity_drift, detail::hermiticity_defect(x));
            if (observer) {
                Matrix lab = x;
                detail::rotate_frame(lab, omega, t, -1);
                observer(t, lab);
            }
            const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
            h *= factor;
        } else {
            ++diag.rejected;
            h *= std::clamp(0.9 * std::pow(en, -0.2), 0.1, 1.0);
        }
        if (t < t1 && h < 1e-14 * std::max(1.0, t))
            throw IntegrationError(fmt::format("propagate: step size underflow at t={}", t));
    }
    detail::rotate_frame(x, omega, t1, -1);
    return x;
}

struct Evolution {
    DensityMatrix state;
    EvolveDiagnostics diagnostics;
};

inline constexpr double kDriftRepairThreshold = 1e-10;
inline constexpr double kDriftLoudThreshold = 1e-8;
inline constexpr double kNegativityFlag = -1e-6;

/// Evolves a density matrix from t0 to t1. Small trace/Hermiticity drift is
/// repaired when it exceeds 1e-10 and reported loudly beyond 1e-8.
inline Evolution evolve(const Propagator& prop, const DensityMatrix& rho0, double t0, double t1,
                        const TrajectoryObserver& observer = {}) {
    EvolveDiagnostics diag;
    Matrix rho = propagate(prop, rho0.matrix(), t0, t1, diag, observer);

    const double herm = detail::hermiticity_defect(rho);
    const double drift = std::abs(rho.trace() - complex(1.0, 0.0));
    if (herm > kDriftRepairThreshold || drift > kDriftRepairThreshold) {
        ++diag.renormalized;
        const auto level = (herm > kDriftLoudThreshold || drift > kDriftLoudThreshold) ? spdlog::level::warn
                                                                                         : spdlog::level::debug;
        spdlog::log(level, "evolve: repairing drift (hermiticity {:.3e}, trace {:.3e}) at t={}", herm, drift, t1);
        Matrix h = 0.5 * (rho + rho.adjoint());
        rho = h / h.trace().real();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    diag.min_eigenvalue = eig.eigenvalues().minCoeff();
    if (diag.min_eigenvalue < kNegativityFlag) {
        ++diag.negativity_flags;
        spdlog::debug("evolve: state not positive at t={}, min eigenvalue {:.3e}", t1, diag.min_eigenvalue);
    }
    return {DensityMatrix(std::move(rho)), diag};
}

} // namespace qwitness

// witness.hpp: two-time measurement protocol and the Kolmogorov-violation witness
//
//   W = sum_{x2} | P(x2) - sum_{x1} P(x2; x1) |
//
// in the Fock basis or on a granulated grid of coherent states, plus the
// deviation of a non-Markovian witness from its Markovian counterpart.

#pragma once

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "qwitness/dynamics.hpp"
#include "qwitness/error.hpp"
#include "qwitness/hilbert.hpp"
#include "qwitness/parallel.hpp"

namespace qwitness {

class MeasurementBasis {
public:
    struct Fock {
        int levels;
    };
    struct CoherentGrid {
        std::vector<complex> centers;
        double cell_weight;
    };

    static MeasurementBasis fock(int levels) {
        if (levels < 1) throw DomainError("MeasurementBasis::fock: levels must be >= 1");
        return MeasurementBasis(Fock{levels});
    }

    static MeasurementBasis coherent_grid(std::vector<complex> centers, double cell_weight) {
        if (centers.empty()) throw DomainError("MeasurementBasis::coherent_grid: no centers");
        if (!(cell_weight > 0.0)) throw DomainError("MeasurementBasis::coherent_grid: cell_weight must be > 0");
        return MeasurementBasis(CoherentGrid{std::move(centers), cell_weight});
    }

    /// Square lattice x + i y, x, y in {-half_extent, ..., half_extent} step `spacing`,
    /// weighted by the Husimi cell area spacing^2/pi.
    static MeasurementBasis square_grid(int half_extent = 2, double spacing = 1.0) {
        std::vector<complex> centers;
        for (int y = -half_extent; y <= half_extent; ++y)
            for (int x = -half_extent; x <= half_extent; ++x) centers.emplace_back(x * spacing, y * spacing);
        return coherent_grid(std::move(centers), spacing * spacing / std::numbers::pi);
    }

    bool is_fock() const noexcept { return std::holds_alternative<Fock>(v_); }
    const std::variant<Fock, CoherentGrid>& variant() const noexcept { return v_; }

    std::size_t outcomes(const FockSpace& space) const {
        if (auto* f = std::get_if<Fock>(&v_)) return static_cast<std::size_t>(std::min(f->levels, space.dim()));
        return std::get<CoherentGrid>(v_).centers.size();
    }

    std::string describe() const {
        if (auto* f = std::get_if<Fock>(&v_)) return fmt::format("fock({})", f->levels);
        return fmt::format("coherent_grid({})", std::get<CoherentGrid>(v_).centers.size());
    }

private:
    explicit MeasurementBasis(std::variant<Fock, CoherentGrid> v) : v_(std::move(v)) {}
    std::variant<Fock, CoherentGrid> v_;
};

enum class BranchMode {
    per_outcome,  // one evolution per first outcome, full joint distribution
    aggregated    // single evolution of rho(t1) minus its measured mixture (linearity of the map)
};

struct WitnessOptions {
    BranchMode mode = BranchMode::per_outcome;
    TailPolicy tail = TailPolicy::warn;
    double negativity_threshold = 1e-10;
    std::vector<std::size_t> branch_order;  // summation order over x1; empty means natural
};

struct TwoTimeDistribution {
    std::vector<double> p_first;  // P(x1)
    std::vector<double> p_blind;  // P(x2) without the first measurement
    Eigen::MatrixXd p_joint;      // (x2, x1)
    EvolveDiagnostics diagnostics;
    std::size_t positivity_flags = 0;
};

namespace detail {

struct ResolvedBasis {
    std::vector<Vector> vectors;
    double weight = 1.0;
};

inline ResolvedBasis resolve(const MeasurementBasis& basis, const FockSpace& space, TailPolicy tail) {
    ResolvedBasis out;
    if (auto* f = std::get_if<MeasurementBasis::Fock>(&basis.variant())) {
        const int levels = std::min(f->levels, space.dim());
        for (int k = 0; k < levels; ++k) out.vectors.push_back(fock_vector(space, k));
        return out;
    }
    const auto& grid = std::get<MeasurementBasis::CoherentGrid>(basis.variant());
    out.weight = grid.cell_weight;
    for (complex a : grid.centers) out.vectors.push_back(coherent_state(space, a, tail).amplitudes());
    return out;
}

inline double expectation(const Vector& v, const Matrix& m) { return (v.adjoint() * m * v)(0, 0).real(); }

// Neumaier-compensated sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double clip_probability(double p, double threshold, std::size_t& flags, const char* what) {
    if (p >= 0.0) return p;
    if (p < -threshold) {
        ++flags;
        spdlog::debug("witness: negative probability {:.3e} for {} (positivity violation), clipped to 0", p, what);
    }
    return 0.0;
}

inline std::vector<std::size_t> branch_order(const WitnessOptions& opt, std::size_t count) {
    if (opt.branch_order.empty()) {
        std::vector<std::size_t> order(count);
        std::iota(order.begin(), order.end(), 0);
        return order;
    }
    std::vector<std::size_t> sorted = opt.branch_order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != i || sorted.size() != count)
            throw DomainError("witness: branch_order must be a permutation of the outcomes");
    return opt.branch_order;
}

inline double kolmogorov_violation(const TwoTimeDistribution& dist, const WitnessOptions& opt) {
    const auto order = branch_order(opt, dist.p_first.size());
    CompensatedSum total;
    for (std::size_t x2 = 0; x2 < dist.p_blind.size(); ++x2) {
        CompensatedSum marginal;
        for (std::size_t x1 : order) marginal.add(dist.p_joint(static_cast<Eigen::Index>(x2), static_cast<Eigen::Index>(x1)));
        total.add(std::abs(dist.p_blind[x2] - marginal.value()));
    }
    return total.value();
}

// Per-outcome distribution given the state just before the first measurement.
inline TwoTimeDistribution distribution_from(const Propagator& prop, const Matrix& rho1, const ResolvedBasis& rb,
                                             double t1, double t2, const WitnessOptions& opt) {
    const std::size_t k = rb.vectors.size();
    TwoTimeDistribution out;
    out.p_first.resize(k);
    out.p_blind.resize(k);
    out.p_joint.setZero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t x = 0; x < k; ++x)
        out.p_first[x] = clip_probability(rb.weight * expectation(rb.vectors[x], rho1), opt.negativity_threshold,
                                          out.positivity_flags, "first outcome");

    // Branch k is the blind (unmeasured) evolution.
    std::vector<std::vector<double>> second(k + 1, std::vector<double>(k));
    std::vector<EvolveDiagnostics> diags(k + 1);
    std::vector<std::size_t> flags(k + 1, 0);
    parallel_for(k + 1, [&](std::size_t b) {
        Matrix start = (b == k) ? rho1 : Matrix(rb.vectors[b] * rb.vectors[b].adjoint());
        if (b == k) start = 0.5 * (start + start.adjoint());
        const Evolution ev = evolve(prop, DensityMatrix(std::move(start)), t1, t2);
        diags[b] = ev.diagnostics;
        for (std::size_t x2 = 0; x2 < k; ++x2)
            second[b][x2] = clip_probability(rb.weight * expectation(rb.vectors[x2], ev.state.matrix()),
                                             opt.negativity_threshold, flags[b], "second outcome");
    });
    for (std::size_t b = 0; b <= k; ++b) {
        out.diagnostics.merge(diags[b]);
        out.positivity_flags += flags[b];
    }
    out.p_blind = second[k];
    for (std::size_t x1 = 0; x1 < k; ++x1)
        for (std::size_t x2 = 0; x2 < k; ++x2)
            out.p_joint(static_cast<Eigen::Index>(x2), static_cast<Eigen::Index>(x1)) = out.p_first[x1] * second[x1][x2];
    return out;
}

struct WitnessValue {
    double value = 0.0;
    EvolveDiagnostics diagnostics;
    std::size_t positivity_flags = 0;
};

inline WitnessValue witness_from(const Propagator& prop, const Matrix& rho1, const ResolvedBasis& rb, double t1,
                                 double t2, const WitnessOptions& opt) {
    WitnessValue out;
    if (opt.mode == BranchMode::per_outcome) {
        const TwoTimeDistribution dist = distribution_from(prop, rho1, rb, t1, t2, opt);
        out.value = kolmogorov_violation(dist, opt);
        out.diagnostics = dist.diagnostics;
        out.positivity_flags = dist.positivity_flags;
        return out;
    }
    // sum_{x1} P(x2; x1) = w <x2| Lambda[sigma] |x2> with sigma = sum_{x1} P(x1) |x1><x1|,
    // so W = sum_{x2} w |<x2| Lambda[rho1 - sigma] |x2>|.
    const std::size_t k = rb.vectors.size();
    Matrix sigma = Matrix::Zero(rho1.rows(), rho1.cols());
    for (std::size_t x = 0; x < k; ++x) {
        const double p = clip_probability(rb.weight * expectation(rb.vectors[x], rho1), opt.negativity_threshold,
                                          out.positivity_flags, "first outcome");
        sigma += p * rb.vectors[x] * rb.vectors[x].adjoint();
    }
    const Matrix diff = propagate(prop, rho1 - sigma, t1, t2, out.diagnostics);
    CompensatedSum total;
    for (std::size_t x2 = 0; x2 < k; ++x2) total.add(std::abs(rb.weight * expectation(rb.vectors[x2], diff)));
    out.value = total.value();
    return out;
}

} // namespace detail

inline void require_times(const Propagator& prop, double t1, double t2) {
    if (!(t1 >= 0.0) || !(t2 >= t1)) throw DomainError("witness: need 0 <= t1 <= t2");
    if (t2 > prop.t_max() * (1.0 + 1e-12))
        throw DomainError(fmt::format("witness: t2={} beyond tabulated rates (t_max={})", t2, prop.t_max()));
}

/// Blind and joint outcome distributions of the two-time protocol starting from rho0 at t = 0.
inline TwoTimeDistribution two_time_distribution(const Propagator& prop, const DensityMatrix& rho0,
                                                 const MeasurementBasis& basis, double t1, double t2,
                                                 const WitnessOptions& opt = {}) {
    require_times(prop, t1, t2);
    const auto rb = detail::resolve(basis, prop.space(), opt.tail);
    const Evolution first = evolve(prop, rho0, 0.0, t1);
    TwoTimeDistribution dist = detail::distribution_from(prop, first.state.matrix(), rb, t1, t2, opt);
    dist.diagnostics.merge(first.diagnostics);
    return dist;
}

inline double witness(const Propagator& prop, const DensityMatrix& rho0, const MeasurementBasis& basis, double t1,
                      double t2, const WitnessOptions& opt = {}) {
    require_times(prop, t1, t2);
    const auto rb = detail::resolve(basis, prop.space(), opt.tail);
    const Evolution first = evolve(prop, rho0, 0.0, t1);
    return detail::witness_from(prop, first.state.matrix(), rb, t1, t2, opt).value;
}

/// W under prop_nM minus W under its Markovian counterpart prop_M.
inline double delta_witness(const Propagator& prop_nM, const Propagator& prop_M, const DensityMatrix& rho0,
                            const MeasurementBasis& basis, double t1, double t2, const WitnessOptions& opt = {}) {
    if (prop_nM.n() != prop_M.n() || !(prop_nM.space() == prop_M.space()))
        throw DomainError("delta_witness: propagators must share n and the Fock space");
    return witness(prop_nM, rho0, basis, t1, t2, opt) - witness(prop_M, rho0, basis, t1, t2, opt);
}

// ----------------------------------------------------------------- sweeps

struct CurveMetadata {
    int n = 1;
    int m = 1;
    std::string bath = "thermal";
    double alpha_exp = 0.0;
    double r0 = 0.0;
    std::string basis;
    std::string initial;
    std::string quantity = "W";
};

struct WitnessCurve {
    std::vector<double> tau;     // 1/omega
    std::vector<double> values;  // W or Delta W
    CurveMetadata meta;
    EvolveDiagnostics diagnostics;
    std::size_t positivity_flags = 0;

    /// Metadata header block, then `tau,value` with tau in periods 2 pi/omega.
    void write_csv(std::ostream& os, double omega = 1.0) const {
        os << fmt::format("# n={}, m={}, bath={}, alpha_exp={:.17g}, r0={:.17g}, basis={}, initial={}, quantity={}\n",
                          meta.n, meta.m, meta.bath, meta.alpha_exp, meta.r0, meta.basis, meta.initial,
                          meta.quantity);
        os << "tau,value\n";
        for (std::size_t i = 0; i < tau.size(); ++i)
            os << fmt::format("{:.17g},{:.17g}\n", tau[i] * omega / (2.0 * std::numbers::pi), values[i]);
    }
};

/// t2 = ratio * t1 (the default equal-interval protocol has ratio 2).
struct Schedule {
    double ratio = 2.0;
};

namespace detail {

inline void require_grid(const std::vector<double>& tau) {
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (!(tau[i] >= 0.0)) throw DomainError("witness_sweep: tau must be >= 0");
        if (i > 0 && tau[i] < tau[i - 1]) throw DomainError("witness_sweep: tau grid must be non-decreasing");
    }
}

// rho(tau_k) for every grid point, chained along the grid.
inline std::vector<Matrix> first_states(const Propagator& prop, const DensityMatrix& rho0,
                                        const std::vector<double>& tau, EvolveDiagnostics& diag) {
    std::vector<Matrix> states;
    states.reserve(tau.size());
    DensityMatrix current = rho0;
    double t = 0.0;
    for (double t1 : tau) {
        Evolution ev = evolve(prop, current, t, t1);
        diag.merge(ev.diagnostics);
        current = std::move(ev.state);
        t = t1;
        states.push_back(current.matrix());
    }
    return states;
}

inline WitnessCurve sweep_one(const Propagator& prop, const DensityMatrix& rho0, const MeasurementBasis& basis,
                              const std::vector<double>& tau, Schedule schedule, const WitnessOptions& opt) {
    require_grid(tau);
    if (!(schedule.ratio >= 1.0)) throw DomainError("witness_sweep: schedule ratio must be >= 1");
    WitnessCurve curve;
    curve.tau = tau;
    curve.values.assign(tau.size(), 0.0);
    if (tau.empty()) return curve;
    require_times(prop, tau.back(), schedule.ratio * tau.back());
    const auto rb = resolve(basis, prop.space(), opt.tail);
    const std::vector<Matrix> rho1 = first_states(prop, rho0, tau, curve.diagnostics);

    std::vector<WitnessValue> out(tau.size());
    parallel_for(tau.size(), [&](std::size_t i) {
        out[i] = witness_from(prop, rho1[i], rb, tau[i], schedule.ratio * tau[i], opt);
    });
    for (std::size_t i = 0; i < tau.size(); ++i) {
        curve.values[i] = out[i].value;
        curve.diagnostics.merge(out[i].diagnostics);
        curve.positivity_flags += out[i].positivity_flags;
    }
    return curve;
}

} // namespace detail

/// W(tau) with t1 = tau, t2 = ratio * tau.
inline WitnessCurve witness_sweep(const Propagator& prop, const DensityMatrix& rho0, const MeasurementBasis& basis,
                                  const std::vector<double>& tau, Schedule schedule = {},
                                  const WitnessOptions& opt = {}) {
    WitnessCurve curve = detail::sweep_one(prop, rho0, basis, tau, schedule, opt);
    curve.meta.n = prop.n();
    curve.meta.basis = basis.describe();
    return curve;
}

/// Delta W(tau) = W_nM(tau) - W_M(tau).
inline WitnessCurve delta_witness_sweep(const Propagator& prop_nM, const Propagator& prop_M,
                                        const DensityMatrix& rho0, const MeasurementBasis& basis,
                                        const std::vector<double>& tau, Schedule schedule = {},
                                        const WitnessOptions& opt = {}) {
    if (prop_nM.n() != prop_M.n() || !(prop_nM.space() == prop_M.space()))
        throw DomainError("delta_witness_sweep: propagators must share n and the Fock space");
    WitnessCurve a = detail::sweep_one(prop_nM, rho0, basis, tau, schedule, opt);
    const WitnessCurve b = detail::sweep_one(prop_M, rho0, basis, tau, schedule, opt);
    for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] -= b.values[i];
    a.diagnostics.merge(b.diagnostics);
    a.positivity_flags += b.positivity_flags;
    a.meta.n = prop_nM.n();
    a.meta.basis = basis.describe();
    a.meta.quantity = "DeltaW";
    return a;
}

} // namespace qwitness

// hilbert.hpp: truncated Fock space, ladder operators, dissipators and the Husimi Q-function

#pragma once

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "qwitness/error.hpp"

namespace qwitness {

using complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Operator = Matrix;

class FockSpace {
public:
    explicit FockSpace(int dim) : dim_(dim) {
        if (dim < 2) throw DomainError("FockSpace: dim must be >= 2, got " + std::to_string(dim));
    }
    int dim() const noexcept { return dim_; }
    bool operator==(const FockSpace&) const = default;

private:
    int dim_;
};

namespace detail {

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double hermiticity_defect(const Matrix& m) { return max_abs(m - m.adjoint()); }

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
        throw DomainError(std::string(where) + ": dimension mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
}

} // namespace detail

/// Unit-norm amplitude vector. Construction normalizes.
class StateVector {
public:
    explicit StateVector(Vector amplitudes) : amps_(std::move(amplitudes)) {
        const double norm = amps_.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) throw DomainError("StateVector: zero or non-finite norm");
        amps_ /= norm;
    }
    const Vector& amplitudes() const noexcept { return amps_; }
    int dim() const noexcept { return static_cast<int>(amps_.size()); }
    complex operator[](int n) const { return amps_(n); }

private:
    Vector amps_;
};

/// Hermitian, unit-trace matrix. Positivity is not enforced.
class DensityMatrix {
public:
    static constexpr double kHermitianTol = 1e-10;
    static constexpr double kTraceTol = 1e-8;

    explicit DensityMatrix(Matrix entries) : rho_(std::move(entries)) {
        if (rho_.rows() != rho_.cols() || rho_.rows() < 2) throw DomainError("DensityMatrix: must be square, dim >= 2");
        const double herm = detail::hermiticity_defect(rho_);
        if (herm > kHermitianTol)
            throw DomainError("DensityMatrix: not Hermitian (max |rho - rho^dag| = " + std::to_string(herm) + ")");
        const double tr = rho_.trace().real();
        if (std::abs(tr - 1.0) > kTraceTol)
            throw DomainError("DensityMatrix: trace " + std::to_string(tr) + " differs from 1");
    }

    static DensityMatrix pure(const StateVector& psi) {
        return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
    }

    static DensityMatrix fock(const FockSpace& space, int n) {
        if (n < 0 || n >= space.dim())
            throw DomainError("DensityMatrix::fock: level " + std::to_string(n) + " outside the truncated space");
        Matrix m = Matrix::Zero(space.dim(), space.dim());
        m(n, n) = 1.0;
        return DensityMatrix(std::move(m));
    }

    const Matrix& matrix() const noexcept { return rho_; }
    int dim() const noexcept { return static_cast<int>(rho_.rows()); }
    complex operator()(int i, int j) const { return rho_(i, j); }

private:
    Matrix rho_;
};

// ------------------------------------------------------------------ ladder

inline Operator annihilation(const FockSpace& space) {
    const int d = space.dim();
    Operator a = Operator::Zero(d, d);
    for (int i = 0; i + 1 < d; ++i) a(i, i + 1) = std::sqrt(static_cast<double>(i + 1));
    return a;
}

inline Operator creation(const FockSpace& space) { return annihilation(space).adjoint(); }

inline Operator number(const FockSpace& space) {
    const int d = space.dim();
    Operator n = Operator::Zero(d, d);
    for (int i = 0; i < d; ++i) n(i, i) = static_cast<double>(i);
    return n;
}

inline Vector fock_vector(const FockSpace& space, int n) {
    if (n < 0 || n >= space.dim()) throw DomainError("fock_vector: level outside the truncated space");
    Vector v = Vector::Zero(space.dim());
    v(n) = 1.0;
    return v;
}

// --------------------------------------------------------------- coherent

enum class TailPolicy { reject, warn, ignore };

/// Largest truncated tail weight accepted by TailPolicy::reject.
inline constexpr double kCoherentTailTol = 1e-6;

/// 1 - sum_{n<dim} e^{-|alpha|^2} |alpha|^{2n}/n!: probability mass lost to truncation.
inline double coherent_tail_weight(const FockSpace& space, complex alpha) {
    const double x = std::norm(alpha);
    double term = std::exp(-x);
    double kept = term;
    for (int n = 1; n < space.dim(); ++n) {
        term *= x / n;
        kept += term;
    }
    return std::max(0.0, 1.0 - kept);
}

/// Truncated coherent state, renormalized on the retained levels.
inline StateVector coherent_state(const FockSpace& space, complex alpha, TailPolicy policy = TailPolicy::reject) {
    const int d = space.dim();
    Vector c(d);
    c(0) = 1.0;
    for (int n = 1; n < d; ++n) c(n) = c(n - 1) * alpha / std::sqrt(static_cast<double>(n));

    if (policy != TailPolicy::ignore) {
        const double tail = coherent_tail_weight(space, alpha);
        if (tail > kCoherentTailTol) {
            const std::string msg = "coherent_state: truncated tail weight " + std::to_string(tail) + " for alpha=(" +
                                    std::to_string(alpha.real()) + "," + std::to_string(alpha.imag()) +
                                    ") exceeds 1e-6 at dim=" + std::to_string(d);
            if (policy == TailPolicy::reject) throw TruncationError(msg, tail);
            spdlog::warn("{}", msg);
        }
    }
    return StateVector(std::move(c));
}

// ------------------------------------------------------------ dissipators

/// 2 L rho L^dag - L^dag L rho - rho L^dag L
inline Matrix standard_dissipator(const Operator& L, const Matrix& rho) {
    detail::require_same_shape(L, rho, "standard_dissipator");
    const Matrix LdL = L.adjoint() * L;
    return 2.0 * L * rho * L.adjoint() - LdL * rho - rho * LdL;
}

/// 2 L rho L - L L rho - rho L L
inline Matrix generalized_dissipator(const Operator& L, const Matrix& rho) {
    detail::require_same_shape(L, rho, "generalized_dissipator");
    const Matrix LL = L * L;
    return 2.0 * L * rho * L - LL * rho - rho * LL;
}

// ------------------------------------------------------------ phase space

/// <alpha|rho|alpha>/pi with the truncated, renormalized coherent state.
inline double husimi_q(const Matrix& rho, complex alpha, TailPolicy policy = TailPolicy::reject) {
    const FockSpace space(static_cast<int>(rho.rows()));
    const Vector v = coherent_state(space, alpha, policy).amplitudes();
    return (v.adjoint() * rho * v)(0, 0).real() / std::numbers::pi;
}

inline double husimi_q(const DensityMatrix& rho, complex alpha, TailPolicy policy = TailPolicy::reject) {
    return husimi_q(rho.matrix(), alpha, policy);
}

} // namespace qwitness

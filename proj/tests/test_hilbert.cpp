#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <random>

#include "qwitness/hilbert.hpp"

using namespace qwitness;

namespace {

Matrix random_hermitian(int d, std::mt19937& rng) {
    std::normal_distribution<double> g;
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = complex(g(rng), g(rng));
    return 0.5 * (m + m.adjoint());
}

Matrix projector(const FockSpace& s, int i, int j) { return fock_vector(s, i) * fock_vector(s, j).adjoint(); }

} // namespace

TEST(FockSpace, RejectsTinyDimension) {
    EXPECT_THROW(FockSpace(1), DomainError);
    EXPECT_NO_THROW(FockSpace(2));
}

TEST(Ladder, Dim3Annihilation) {
    const Matrix a = annihilation(FockSpace(3));
    Matrix expected = Matrix::Zero(3, 3);
    expected(0, 1) = 1.0;
    expected(1, 2) = std::sqrt(2.0);
    EXPECT_LT((a - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((creation(FockSpace(3)) - expected.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Ladder, VacuumAndNumber) {
    const FockSpace s(20);
    EXPECT_EQ((annihilation(s) * fock_vector(s, 0)).norm(), 0.0);
    const Matrix n = creation(s) * annihilation(s);
    for (int k = 0; k < s.dim(); ++k) EXPECT_LT((n * fock_vector(s, k) - double(k) * fock_vector(s, k)).norm(), 1e-12);
    EXPECT_LT((n - number(s)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ladder, TruncatedCommutator) {
    const FockSpace s(8);
    const Matrix a = annihilation(s);
    const Matrix comm = a * a.adjoint() - a.adjoint() * a;
    for (int i = 0; i + 1 < s.dim(); ++i) EXPECT_NEAR(comm(i, i).real(), 1.0, 1e-14);
    EXPECT_NEAR(comm(7, 7).real(), -7.0, 1e-14);
}

TEST(DensityMatrix, Invariants) {
    Matrix m = Matrix::Identity(3, 3) / 3.0;
    EXPECT_NO_THROW(DensityMatrix{m});
    Matrix bad = m;
    bad(0, 1) = 1e-6;
    EXPECT_THROW(DensityMatrix{bad}, DomainError);
    EXPECT_THROW(DensityMatrix{Matrix(2.0 * m)}, DomainError);
    EXPECT_THROW(DensityMatrix::fock(FockSpace(4), 4), DomainError);
}

TEST(CoherentState, VacuumIsExact) {
    const FockSpace s(20);
    const StateVector v = coherent_state(s, 0.0);
    EXPECT_EQ(v[0], complex(1.0, 0.0));
    for (int k = 1; k < s.dim(); ++k) EXPECT_EQ(v[k], complex(0.0, 0.0));
}

TEST(CoherentState, AmplitudesMatchClosedForm) {
    const FockSpace s(20);
    const complex alpha(0.7, -0.4);
    const StateVector v = coherent_state(s, alpha);
    // Before renormalization <0|alpha> = exp(-|alpha|^2/2); renormalization divides by sqrt(1 - tail).
    const double tail = coherent_tail_weight(s, alpha);
    for (int k = 0; k < 8; ++k) {
        const complex expected = std::exp(-std::norm(alpha) / 2) * std::pow(alpha, k) /
                                 std::sqrt(std::tgamma(k + 1.0)) / std::sqrt(1.0 - tail);
        EXPECT_LT(std::abs(v[k] - expected), 1e-14) << k;
    }
    EXPECT_NEAR(v.amplitudes().norm(), 1.0, 1e-12);
}

TEST(CoherentState, VacuumOverlapAlphaOne) {
    const FockSpace s(20);
    const StateVector v = coherent_state(s, 1.0);
    const double renorm = std::sqrt(1.0 - coherent_tail_weight(s, 1.0));
    EXPECT_NEAR(v[0].real() * renorm, std::exp(-0.5), 1e-15);
    EXPECT_NEAR(std::exp(-0.5), 0.6065, 1e-4);
}

TEST(CoherentState, TailWeightIsPoissonTail) {
    // P(N >= d) for N ~ Poisson(|alpha|^2) is the regularized lower incomplete gamma P(d, |alpha|^2).
    for (int d : {5, 10, 20}) {
        for (double x : {0.3, 1.0, 4.0, 8.0}) {
            const double oracle = boost::math::gamma_p(d, x);
            EXPECT_NEAR(coherent_tail_weight(FockSpace(d), std::sqrt(x)), oracle, 1e-13) << d << " " << x;
        }
    }
}

TEST(CoherentState, TailPolicies) {
    const FockSpace s(20);
    const complex far(2.0, 2.0);  // |alpha|^2 = 8, tail ~ 2.5e-4
    EXPECT_THROW(coherent_state(s, far, TailPolicy::reject), TruncationError);
    try {
        coherent_state(s, far, TailPolicy::reject);
    } catch (const TruncationError& e) {
        EXPECT_GT(e.tail_weight(), 1e-6);
    }
    EXPECT_NO_THROW(coherent_state(s, far, TailPolicy::warn));
    EXPECT_NO_THROW(coherent_state(s, far, TailPolicy::ignore));
    EXPECT_NO_THROW(coherent_state(s, complex(1.0, 1.0), TailPolicy::reject));
}

TEST(StandardDissipator, TwoPhotonNumberState) {
    const FockSpace s(6);
    const Matrix out = standard_dissipator(annihilation(s), projector(s, 2, 2));
    const Matrix expected = 4.0 * projector(s, 1, 1) - 4.0 * projector(s, 2, 2);
    EXPECT_LT((out - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(StandardDissipator, VacuumFixedPoint) {
    const FockSpace s(6);
    EXPECT_LT(standard_dissipator(annihilation(s), projector(s, 0, 0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GeneralizedDissipator, CoherenceCreation) {
    const FockSpace s(6);
    const Matrix out = generalized_dissipator(annihilation(s), projector(s, 2, 2));
    const Matrix expected = 2.0 * std::sqrt(6.0) * projector(s, 1, 3) - std::sqrt(2.0) * projector(s, 0, 2) -
                            2.0 * std::sqrt(3.0) * projector(s, 2, 4);
    EXPECT_LT((out - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Dissipators, DimensionMismatch) {
    EXPECT_THROW(standard_dissipator(annihilation(FockSpace(4)), Matrix::Zero(5, 5)), DomainError);
    EXPECT_THROW(generalized_dissipator(annihilation(FockSpace(4)), Matrix::Zero(3, 3)), DomainError);
}

TEST(Dissipators, TraceAnnihilationAndHermiticity) {
    std::mt19937 rng(7);
    const FockSpace s(20);
    const Matrix a = annihilation(s);
    const Matrix a2 = a * a;
    for (int k = 0; k < 100; ++k) {
        const Matrix rho = random_hermitian(20, rng);
        for (const Matrix* L : {&a, &a2}) {
            const Matrix d = standard_dissipator(*L, rho);
            const Matrix g = generalized_dissipator(*L, rho);
            const Matrix gd = generalized_dissipator(Matrix(L->adjoint()), rho);
            const double scale = rho.cwiseAbs().maxCoeff() * 400.0;
            EXPECT_LT(std::abs(d.trace()), 1e-12 * scale);
            EXPECT_LT(std::abs(g.trace()), 1e-12 * scale);
            EXPECT_LT((d - d.adjoint()).cwiseAbs().maxCoeff(), 1e-12 * scale);
            const Matrix pair = g + gd;
            EXPECT_LT((pair - pair.adjoint()).cwiseAbs().maxCoeff(), 1e-12 * scale);
        }
    }
}

TEST(Dissipators, DiagonalStructure) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const FockSpace s(6);
    const Matrix a = annihilation(s);
    for (int n : {1, 2}) {
        Matrix L = Matrix::Identity(6, 6);
        for (int k = 0; k < n; ++k) L = L * a;
        for (int trial = 0; trial < 20; ++trial) {
            Matrix rho = Matrix::Zero(6, 6);
            for (int i = 0; i < 6; ++i) rho(i, i) = u(rng);
            const Matrix d = standard_dissipator(L, rho);
            const Matrix g = generalized_dissipator(L, rho);
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) {
                    if (i != j) { EXPECT_EQ(std::abs(d(i, j)), 0.0); }
                    if (j - i != 2 * n) { EXPECT_LT(std::abs(g(i, j)), 1e-15) << n << " " << i << " " << j; }
                }
        }
    }
}

TEST(Husimi, VacuumValues) {
    const FockSpace s(20);
    const DensityMatrix vac = DensityMatrix::fock(s, 0);
    EXPECT_NEAR(husimi_q(vac, 0.0), 1.0 / std::numbers::pi, 1e-15);
    EXPECT_NEAR(husimi_q(vac, 1.0), std::exp(-1.0) / std::numbers::pi, 1e-12);
    EXPECT_NEAR(husimi_q(vac, 1.0), 0.11709, 1e-5);
}

TEST(Husimi, RiemannNormalization) {
    const FockSpace s(20);
    const DensityMatrix vac = DensityMatrix::fock(s, 0);
    const double h = 0.1;
    double total = 0.0;
    for (double x = -3.0; x <= 3.0 + 1e-9; x += h)
        for (double y = -3.0; y <= 3.0 + 1e-9; y += h) {
            const double q = husimi_q(vac, complex(x, y), TailPolicy::ignore);
            EXPECT_GE(q, -1e-14);
            total += q * h * h;
        }
    EXPECT_NEAR(total, 1.0, 1e-3);
}

TEST(Husimi, NonNegativeOnGrid) {
    std::mt19937 rng(3);
    const FockSpace s(20);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix m = random_hermitian(20, rng);
        Matrix rho = m * m.adjoint();
        rho /= rho.trace().real();
        for (int x = -2; x <= 2; ++x)
            for (int y = -2; y <= 2; ++y) EXPECT_GE(husimi_q(rho, complex(x, y), TailPolicy::ignore), -1e-14);
    }
}

#include "msh2/model.hpp"
#include "msh2/spectrum.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <random>

using namespace msh2;

TEST_CASE("delay channel moments") {
    Vector alpha(3), p(3);
    alpha << 1.0, 0.67, 0.0;
    p << 0.6, 0.3, 0.1;
    const NoiseModel nm = delay_channel_noise(alpha, p);

    CHECK(nm.horizon() == 2);
    CHECK(nm.mu(0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(nm.mu(1) == doctest::Approx(0.201).epsilon(1e-12));
    CHECK(nm.mu(2) == doctest::Approx(0.0));
    CHECK(nm.beta(0, 0) == doctest::Approx(0.24).epsilon(1e-12));
    CHECK(nm.beta(1, 1) == doctest::Approx(0.094269).epsilon(1e-12));
    CHECK(nm.beta(0, 1) == doctest::Approx(-0.1206).epsilon(1e-12));
    CHECK(nm.beta(2, 2) == doctest::Approx(0.0));

    // Deterministic identity channel
    Vector a1(1), p1(1);
    a1 << 1.0;
    p1 << 1.0;
    const NoiseModel ident = delay_channel_noise(a1, p1);
    CHECK(ident.mu(0) == doctest::Approx(1.0));
    CHECK(ident.beta(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("delay channel with zero-weight delays reduces to erasure") {
    Vector alpha(3), p(3);
    alpha << 1.0, 0.0, 0.0;
    const double e = 0.25;
    p << 1.0 - e, 0.15, 0.10;
    const NoiseModel nm = delay_channel_noise(alpha, p);
    CHECK(nm.mu(0) == doctest::Approx(1.0 - e).epsilon(1e-12));
    CHECK(nm.beta(0, 0) == doctest::Approx(e * (1.0 - e)).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i != 0 || j != 0) {
                CHECK(nm.beta(i, j) == doctest::Approx(0.0));
            }
        }
    }

    const NoiseModel er = erasure_channel_noise(e);
    CHECK(er.mu(0) == doctest::Approx(nm.mu(0)));
    CHECK(er.beta(0, 0) == doctest::Approx(nm.beta(0, 0)));
}

TEST_CASE("delay channel validation errors") {
    Vector alpha(2), p(2);
    alpha << 1.0, 1.0;
    p << 0.6, 0.5;
    CHECK_THROWS_AS(delay_channel_noise(alpha, p), std::invalid_argument);
    p << 1.2, -0.2;
    CHECK_THROWS_AS(delay_channel_noise(alpha, p), std::invalid_argument);
}

TEST_CASE("erasure channel moments") {
    const NoiseModel perfect = erasure_channel_noise(0.0);
    CHECK(perfect.mu(0) == doctest::Approx(1.0));
    CHECK(perfect.beta(0, 0) == doctest::Approx(0.0));

    const NoiseModel half = erasure_channel_noise(0.5);
    CHECK(half.mu(0) == doctest::Approx(0.5));
    CHECK(half.beta(0, 0) == doctest::Approx(0.25));

    const NoiseModel e01 = erasure_channel_noise(0.1);
    CHECK(e01.mu(0) == doctest::Approx(0.9));
    CHECK(e01.beta(0, 0) == doctest::Approx(0.09));

    CHECK_THROWS_AS(erasure_channel_noise(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(erasure_channel_noise(1.1), std::invalid_argument);
}

TEST_CASE("delay channel beta equals the exact outcome covariance") {
    // beta must equal the covariance of the vector (alpha_i delta(tau - i))_i
    // under tau ~ p, computed by exhaustive enumeration.
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const int m = 1 + static_cast<int>(gen() % 4);
        Vector alpha(m), p(m);
        double total = 0.0;
        for (int i = 0; i < m; ++i) {
            alpha(i) = 2.0 * unif(gen) - 1.0;
            p(i) = unif(gen) + 1e-3;
            total += p(i);
        }
        p /= total;
        p(m - 1) += 1.0 - p.sum();  // exact simplex up to rounding
        const NoiseModel nm = delay_channel_noise(alpha, p);

        Vector mean = Vector::Zero(m);
        for (int outcome = 0; outcome < m; ++outcome) {
            Vector x = Vector::Zero(m);
            x(outcome) = alpha(outcome);
            mean += p(outcome) * x;
        }
        Matrix cov = Matrix::Zero(m, m);
        for (int outcome = 0; outcome < m; ++outcome) {
            Vector x = Vector::Zero(m);
            x(outcome) = alpha(outcome);
            cov += p(outcome) * (x - mean) * (x - mean).transpose();
        }
        CHECK(approx_equal(nm.mu, mean, 1e-12));
        CHECK(approx_equal(nm.beta, cov, 1e-12));
    }
}

TEST_CASE("relative degree basics") {
    Matrix A0 = Matrix::Zero(1, 1);
    Vector B0 = Vector::Ones(1);
    Matrix C0 = Matrix::Ones(1, 1);
    CHECK(relative_degree(A0, B0, C0) == 1);

    Matrix A(2, 2);
    A << 0.0, 1.0, 0.0, 0.0;
    Vector B(2);
    B << 0.0, 1.0;
    Matrix C(1, 2);
    C << 1.0, 0.0;
    CHECK(relative_degree(A, B, C) == 2);

    // identically zero channel
    Matrix Cz = Matrix::Zero(1, 2);
    CHECK_THROWS_AS(relative_degree(A, B, Cz), std::domain_error);
}

TEST_CASE("relative degree of the example plant measurement channels") {
    const Plant plant = testing::example_plant(0.8);
    CHECK(relative_degree(plant.A, plant.B1, plant.C2) == 1);
    CHECK(relative_degree(plant.A, plant.B2, plant.C2) == 1);
}

TEST_CASE("relative degree is invariant under state similarity") {
    std::mt19937_64 gen(11);
    for (int rep = 0; rep < 20; ++rep) {
        const Index n = 2 + static_cast<Index>(gen() % 3);
        Matrix A = testing::random_matrix(gen, n, n);
        Vector B = testing::random_matrix(gen, n, 1);
        Matrix C = testing::random_matrix(gen, 1, n);

        // well-conditioned transform: orthogonal factor plus mild scaling
        Eigen::HouseholderQR<Matrix> qr(testing::random_matrix(gen, n, n));
        Matrix T = qr.householderQ();
        T *= 1.7;

        const int r = relative_degree(A, B, C);
        const Matrix Ti = T.inverse();
        const int rt = relative_degree(T * A * Ti, T * B, C * Ti);
        CHECK(r == rt);
    }
}

TEST_CASE("transmission zeros of a square system") {
    // C (zI - A)^{-1} B with a known finite zero: G(z) = (z - 0.5)/(z^2)
    Matrix A(2, 2);
    A << 0.0, 1.0, 0.0, 0.0;
    Matrix B(2, 1);
    B << 0.0, 1.0;
    Matrix C(1, 2);
    C << -0.5, 1.0;
    bool degenerate = true;
    const auto zeros = transmission_zeros(A, B, C, &degenerate);
    CHECK(!degenerate);
    REQUIRE(zeros.size() == 1);
    CHECK(std::abs(zeros[0] - Complex(0.5, 0.0)) < 1e-9);
}

TEST_CASE("validate_assumptions on the example plant") {
    const Plant plant = testing::example_plant(0.8);
    const NoiseModel nm = delay_channel_noise(testing::example_alpha(), testing::example_probs(0.3));
    const AssumptionReport rep = validate_assumptions(plant, nm.mu);

    CHECK(rep.stabilizable_AB2.ok);
    CHECK(rep.no_unit_circle_unobservable_AC1.ok);
    CHECK(rep.detectable_AC2.ok);
    CHECK(rep.no_unit_circle_unstabilizable.ok);
    CHECK(rep.H_nonzero_at_unstable_poles.ok);
    CHECK(rep.Gy_minimum_phase.ok);
    CHECK(rep.C2Psi_full_column_rank.ok);
    CHECK(rep.pass());
    CHECK(rep.r1 == 1);
    CHECK(rep.r2 == 1);
    REQUIRE(rep.unstable_poles.size() == 2);
    double prod = 1.0;
    for (const Complex& z : rep.unstable_poles) {
        prod *= std::abs(z);
    }
    CHECK(prod == doctest::Approx(1.32).epsilon(1e-9));
}

TEST_CASE("validate_assumptions failure modes") {
    // unreachable unstable mode
    Matrix A = Matrix::Constant(1, 1, 2.0);
    Vector B1 = Vector::Ones(1);
    Vector B2 = Vector::Zero(1);
    Matrix C1 = Matrix::Ones(1, 1);
    Matrix C2 = Matrix::Ones(1, 1);
    Vector D = Vector::Zero(1);
    const Plant bad(A, B1, B2, C1, C2, D);
    Vector H(1);
    H << 1.0;
    const AssumptionReport rep = validate_assumptions(bad, H);
    CHECK(!rep.stabilizable_AB2.ok);
    CHECK(!rep.pass());

    // H vanishing at the unstable pole (H(z) = 1 - 1.1 z^{-1}, pole at 1.1)
    Matrix A2 = Matrix::Constant(1, 1, 1.1);
    const Plant plant2(A2, B1, Vector::Ones(1), C1, C2, D);
    Vector H2(2);
    H2 << 1.0, -1.1;
    const AssumptionReport rep2 = validate_assumptions(plant2, H2);
    CHECK(!rep2.H_nonzero_at_unstable_poles.ok);
}

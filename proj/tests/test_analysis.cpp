#include "msh2/analysis.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <random>

using namespace msh2;

namespace {

Controller zero_controller(Index q) {
    return Controller{StateSpace(Matrix(0, 0), Matrix(0, q), Matrix(1, 0), Matrix::Zero(1, q)),
                      false};
}

struct ExampleSetup {
    Plant plant;
    NoiseModel noise;
    SpectralModel sm;
    Controller K;
    double J_opt;
};

ExampleSetup example_setup(double p) {
    const Plant plant = testing::example_plant(0.8);
    const NoiseModel noise =
        delay_channel_noise(testing::example_alpha(), testing::example_probs(p));
    const SynthesisResult synth = synthesize(plant, noise, FeedbackKind::Output);
    REQUIRE(synth.stabilizable);
    return ExampleSetup{plant, noise, spectral_model_from_noise(noise), *synth.K, synth.J_opt};
}

}  // namespace

TEST_CASE("nominal loop with zero controller on a stable plant") {
    std::mt19937_64 gen(2);
    const Matrix A = testing::random_stable(gen, 3, 0.7);
    const Plant plant(A, testing::random_matrix(gen, 3, 1), testing::random_matrix(gen, 3, 1),
                      testing::random_matrix(gen, 1, 3), testing::random_matrix(gen, 2, 3),
                      Vector::Zero(1));
    const SpectralModel sm = spectral_model_from_noise(erasure_channel_noise(0.3));
    const NominalClosedLoop loop = close_nominal(plant, sm, zero_controller(2));

    CHECK(h2_norm_sq(loop.G_uw()) == doctest::Approx(0.0));
    CHECK(h2_norm_sq(loop.G_ud()) == doctest::Approx(0.0));

    // G_zw equals the open-loop disturbance map
    const StateSpace open_loop(plant.A, plant.B1, plant.C1, Matrix::Zero(1, 1));
    CHECK(h2_norm_sq(loop.G_zw()) == doctest::Approx(h2_norm_sq(open_loop)).epsilon(1e-10));
}

TEST_CASE("close_nominal rejects destabilizing controllers") {
    Matrix A = Matrix::Constant(1, 1, 1.5);
    const Plant plant(A, Vector::Ones(1), Vector::Ones(1), Matrix::Ones(1, 1),
                      Matrix::Ones(1, 1), Vector::Zero(1));
    const SpectralModel sm = spectral_model_from_noise(erasure_channel_noise(0.0));
    CHECK_THROWS_AS(close_nominal(plant, sm, zero_controller(1)), std::domain_error);
}

TEST_CASE("perfect channel reproduces the classical LTI loop") {
    NoiseModel perfect(Vector::Ones(1), Matrix::Zero(1, 1));
    const SpectralModel sm = spectral_model_from_noise(perfect);
    CHECK(sm.noise_free());

    std::mt19937_64 gen(4);
    const Matrix A = testing::random_stable(gen, 2, 0.6);
    const Plant plant(A, testing::random_matrix(gen, 2, 1), testing::random_matrix(gen, 2, 1),
                      testing::random_matrix(gen, 1, 2), testing::random_matrix(gen, 1, 2),
                      Vector::Zero(1));
    const StateSpace K(Matrix::Zero(1, 1), Matrix::Ones(1, 1),
                       Matrix::Constant(1, 1, 0.05), Matrix::Constant(1, 1, 0.05));
    const Controller ctrl{K, false};
    const NominalClosedLoop loop = close_nominal(plant, sm, ctrl);

    // classical closed loop assembled directly
    Matrix Acl(3, 3);
    Acl.topLeftCorner(2, 2) = plant.A + plant.B2 * K.D(0, 0) * plant.C2;
    Acl.topRightCorner(2, 1) = plant.B2 * K.C;
    Acl.bottomLeftCorner(1, 2) = K.B * plant.C2;
    Acl.bottomRightCorner(1, 1) = K.A;
    Matrix Bcl = Matrix::Zero(3, 1);
    Bcl.topRows(2) = plant.B1;
    Matrix Ccl = Matrix::Zero(1, 3);
    Ccl.leftCols(2) = plant.C1;
    const StateSpace classical(Acl, Bcl, Ccl, Matrix::Zero(1, 1));
    CHECK(h2_norm_sq(loop.G_zw()) == doctest::Approx(h2_norm_sq(classical)).epsilon(1e-10));
}

TEST_CASE("ms_stability with zero uncertainty path") {
    std::mt19937_64 gen(6);
    const Matrix A = testing::random_stable(gen, 3, 0.7);
    const Plant plant(A, testing::random_matrix(gen, 3, 1), testing::random_matrix(gen, 3, 1),
                      testing::random_matrix(gen, 1, 3), testing::random_matrix(gen, 2, 3),
                      Vector::Zero(1));
    const SpectralModel sm = spectral_model_from_noise(erasure_channel_noise(0.4));
    const NominalClosedLoop loop = close_nominal(plant, sm, zero_controller(2));
    const StabilityReport rep = ms_stability(loop, sm);

    CHECK(rep.ms_stable);
    CHECK(rep.margin == doctest::Approx(1.0));
    CHECK(rep.J_H2 == doctest::Approx(rep.norm_zw_sq).epsilon(1e-12));
}

TEST_CASE("ms verdict flips exactly at the small-gain crossing") {
    const ExampleSetup ex = example_setup(0.3);
    const NominalClosedLoop loop = close_nominal(ex.plant, ex.sm, ex.K);
    const StabilityReport base = ms_stability(loop, ex.sm);
    REQUIRE(base.ms_stable);

    // Scale the factor: the verdict must flip at scale^2 |G_ud Phi|^2 = 1.
    const double crossing = 1.0 / std::sqrt(base.norm_ud_phi_sq);
    for (const double s : {0.5 * crossing, 0.99 * crossing, 1.01 * crossing, 2.0 * crossing}) {
        SpectralModel scaled = ex.sm;
        scaled.Phi *= s;
        scaled.Bhat2 *= s;
        scaled.Dhat2 *= s;
        const StabilityReport rep = ms_stability(loop, scaled);
        CHECK(rep.ms_stable == (s < crossing));
    }
}

TEST_CASE("worked example: formula cost equals closed-loop analysis cost") {
    for (const double p : {0.0, 0.3, 0.6}) {
        const ExampleSetup ex = example_setup(p);
        const NominalClosedLoop loop = close_nominal(ex.plant, ex.sm, ex.K);
        const StabilityReport rep = ms_stability(loop, ex.sm);
        REQUIRE(rep.ms_stable);
        CHECK(rep.J_H2 == doctest::Approx(ex.J_opt).epsilon(1e-8));
    }
}

TEST_CASE("scaling certificate") {
    // diagonal case
    Matrix G(2, 2);
    G << 0.5, 0.0, 0.0, 0.5;
    const auto cert = scaling_certificate(G);
    REQUIRE(cert.has_value());
    CHECK((G(0, 0) + *cert * G(1, 0)) < 1.0);
    CHECK((G(0, 1) / *cert + G(1, 1)) < 1.0);

    // rho = 1 exactly: no certificate
    Matrix G1(2, 2);
    G1 << 1.0, 0.0, 0.0, 0.5;
    CHECK(!scaling_certificate(G1).has_value());
    Matrix G2(2, 2);
    G2 << 0.5, 0.5, 0.5, 0.5;
    CHECK(!scaling_certificate(G2).has_value());

    // random positive matrices with rho < 1: certificate validates
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        Matrix M(2, 2);
        M << unif(gen), unif(gen), unif(gen), unif(gen);
        M *= 0.9 / spectral_radius(M);
        const auto c = scaling_certificate(M);
        REQUIRE(c.has_value());
        CHECK((M(0, 0) + *c * M(1, 0)) < 1.0);
        CHECK((M(0, 1) / *c + M(1, 1)) < 1.0);
    }
}

TEST_CASE("spectral radius agrees with the scaling infimum") {
    // rho(G) = inf over gamma of the worse weighted column sum (evaluated by
    // ternary search on the quasiconvex objective).
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        Matrix M(2, 2);
        M << unif(gen), unif(gen), unif(gen), unif(gen);
        M *= 0.9 / spectral_radius(M);

        const auto worst = [&](double g2) {
            return std::max(M(0, 0) + g2 * M(1, 0), M(0, 1) / g2 + M(1, 1));
        };
        double lo = 1e-6, hi = 1e6;
        for (int it = 0; it < 300; ++it) {
            const double m1 = lo + (hi - lo) / 3.0;
            const double m2 = hi - (hi - lo) / 3.0;
            if (worst(m1) < worst(m2)) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        CHECK(worst((lo + hi) / 2.0) == doctest::Approx(spectral_radius(M)).epsilon(1e-8));
    }
}

TEST_CASE("moment oracle reductions") {
    // deterministic channel: rho_moment = rho(A_cl)^2
    std::mt19937_64 gen(10);
    const Matrix A = testing::random_stable(gen, 3, 0.8);
    const Plant plant(A, testing::random_matrix(gen, 3, 1), testing::random_matrix(gen, 3, 1),
                      testing::random_matrix(gen, 1, 3), testing::random_matrix(gen, 1, 3),
                      Vector::Zero(1));
    NoiseModel deterministic(Vector::Ones(1), Matrix::Zero(1, 1));
    const Controller K0 = zero_controller(1);
    const MomentOracleResult res = moment_oracle(plant, deterministic, K0);
    CHECK(res.rho_moment ==
          doctest::Approx(spectral_radius(A) * spectral_radius(A)).epsilon(1e-9));

    // memoryless erasure: verdict matches the small-gain test
    const NoiseModel er = erasure_channel_noise(0.35);
    const SpectralModel sm = spectral_model_from_noise(er);
    const NominalClosedLoop loop = close_nominal(plant, sm, K0);
    const StabilityReport rep = ms_stability(loop, sm);
    const MomentOracleResult res2 = moment_oracle(plant, er, K0);
    CHECK((res2.rho_moment < 1.0) == rep.ms_stable);
    if (res2.rho_moment < 1.0) {
        CHECK(res2.power_z == doctest::Approx(rep.J_H2).epsilon(1e-9));
    }

    // cap enforcement
    NoiseModel big(Vector::Zero(5), Matrix::Identity(5, 5));
    CHECK_THROWS_AS(moment_oracle(plant, big, K0), std::invalid_argument);
}

TEST_CASE("moment oracle agrees with the analysis formulas on random loops") {
    std::mt19937_64 gen(1234);
    int stable_count = 0;
    for (int rep = 0; rep < 25; ++rep) {
        const Index n = 1 + static_cast<Index>(gen() % 3);
        const int tau = static_cast<int>(gen() % 3);
        const testing::RandomLoop rl = testing::random_stable_loop(gen, n, tau);
        const SpectralModel sm = spectral_model_from_noise(rl.noise);
        const NominalClosedLoop loop = close_nominal(rl.plant, sm, rl.controller);
        const StabilityReport rep_an = ms_stability(loop, sm);
        const MomentOracleResult res = moment_oracle(rl.plant, rl.noise, rl.controller);

        CHECK((res.rho_moment < 1.0) == rep_an.ms_stable);
        if (rep_an.ms_stable) {
            ++stable_count;
            CHECK(res.power_z == doctest::Approx(rep_an.J_H2).epsilon(1e-6));
        }
    }
    CHECK(stable_count >= 5);
}

TEST_CASE("worked example: moment oracle confirms the optimal cost") {
    const ExampleSetup ex = example_setup(0.3);
    const MomentOracleResult res = moment_oracle(ex.plant, ex.noise, ex.K);
    CHECK(res.rho_moment < 1.0);
    CHECK(res.power_z == doctest::Approx(ex.J_opt).epsilon(1e-6));
}

TEST_CASE("no perturbed same-order controller beats the synthesized one") {
    const ExampleSetup ex = example_setup(0.3);
    std::mt19937_64 gen(31415);

    int accepted = 0;
    int tried = 0;
    while (accepted < 50 && tried < 5000) {
        ++tried;
        StateSpace K = ex.K.K;
        const double scale = 0.002 + 0.03 * (tried % 7);
        K.A += scale * testing::random_matrix(gen, K.order(), K.order());
        K.B += scale * testing::random_matrix(gen, K.order(), K.inputs());
        K.C += scale * testing::random_matrix(gen, 1, K.order());
        K.D += scale * testing::random_matrix(gen, 1, K.inputs());
        const Controller perturbed{K, false};
        try {
            const NominalClosedLoop loop = close_nominal(ex.plant, ex.sm, perturbed);
            const StabilityReport rep = ms_stability(loop, ex.sm);
            if (!rep.ms_stable) {
                continue;
            }
            ++accepted;
            CHECK(rep.J_H2 >= ex.J_opt - 1e-9 * (1.0 + ex.J_opt));
        } catch (const std::domain_error&) {
            continue;
        }
    }
    CHECK(accepted == 50);
}

TEST_CASE("perfect channel synthesis reduces to the classical H2 design") {
    const Plant plant = testing::example_plant(0.8);
    NoiseModel perfect(Vector::Ones(1), Matrix::Zero(1, 1));

    const SynthesisResult synth = synthesize(plant, perfect, FeedbackKind::Output);
    REQUIRE(synth.stabilizable);

    // Independent classical route: state-feedback DARE for (A, B2) with the
    // output weights; minimum phase and r1 = 1 leave no observer excess.
    const DareProblem classical(plant.A, plant.B2, Matrix(plant.C1.transpose() * plant.C1),
                                Vector(plant.C1.transpose() * plant.D), plant.D.squaredNorm());
    const DareSolution dare = solve_dare(classical);
    const double J_classical = plant.B1.dot(dare.X * plant.B1);
    CHECK(synth.J_opt == doctest::Approx(J_classical).epsilon(1e-9));

    // and the assembled loop achieves it
    const SpectralModel sm = spectral_model_from_noise(perfect);
    const NominalClosedLoop loop = close_nominal(plant, sm, *synth.K);
    const StabilityReport rep = ms_stability(loop, sm);
    REQUIRE(rep.ms_stable);
    CHECK(rep.J_H2 == doctest::Approx(J_classical).epsilon(1e-9));
}

TEST_CASE("near-boundary verdicts are flagged marginal") {
    const ExampleSetup ex = example_setup(0.3);
    const NominalClosedLoop loop = close_nominal(ex.plant, ex.sm, ex.K);
    const StabilityReport base = ms_stability(loop, ex.sm);

    // Scale the factor to land within 1e-9 of the small-gain boundary.
    const double crossing = 1.0 / std::sqrt(base.norm_ud_phi_sq);
    SpectralModel scaled = ex.sm;
    const double s = crossing * std::sqrt(1.0 - 5e-10);
    scaled.Phi *= s;
    scaled.Bhat2 *= s;
    scaled.Dhat2 *= s;
    const StabilityReport rep = ms_stability(loop, scaled);
    CHECK(std::abs(rep.margin) < 1e-8);
    CHECK(rep.marginal);
    CHECK(!base.marginal);
}

TEST_CASE("cost curve over the delay grid is non-convex in the delay mass") {
    // The optimal cost grows with the one-step-delay probability but drops
    // again as that probability approaches one.
    std::vector<double> J;
    for (const double p : {0.0, 0.3, 0.8, 0.9}) {
        const Plant plant = testing::example_plant(0.8);
        const SynthesisResult synth = synthesize(
            plant, delay_channel_noise(testing::example_alpha(), testing::example_probs(p)),
            FeedbackKind::Output);
        REQUIRE(synth.stabilizable);
        J.push_back(synth.J_opt);
    }
    CHECK(J[0] < J[1]);
    CHECK(J[1] < J[2]);
    CHECK(J[3] < J[2]);
}

TEST_CASE("J_H2 is monotone in the uncertainty level") {
    const ExampleSetup ex = example_setup(0.3);
    const NominalClosedLoop loop = close_nominal(ex.plant, ex.sm, ex.K);
    double last = -1.0;
    for (const double s : {0.2, 0.5, 0.8, 1.0}) {
        const NoiseModel scaled(ex.noise.mu, Matrix(s * ex.noise.beta));
        const SpectralModel sm = spectral_model_from_noise(scaled);
        const StabilityReport rep = ms_stability(loop, sm);
        REQUIRE(rep.ms_stable);
        CHECK(rep.J_H2 > last);
        last = rep.J_H2;
    }
}

#include "msh2/sim.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <random>

using namespace msh2;

namespace {

Controller zero_controller(Index q) {
    return Controller{StateSpace(Matrix(0, 0), Matrix(0, q), Matrix(1, 0), Matrix::Zero(1, q)),
                      false};
}

}  // namespace

TEST_CASE("channel path sampling: exact mechanisms") {
    // perfect channel: all direct gains are 1
    const Matrix perfect = sample_channel_path(ErasureChannel{0.0}, 100, 42);
    CHECK(perfect.col(0).minCoeff() == doctest::Approx(1.0));

    // deterministic unit delay: every packet arrives once with gain 1 at lag 1
    Vector alpha(3), p(3);
    alpha << 1.0, 1.0, 1.0;
    p << 0.0, 1.0, 0.0;
    const Matrix unit_delay = sample_channel_path(DelayChannel{alpha, p}, 200, 42);
    for (int k = 1; k < 200; ++k) {
        CHECK(unit_delay(k, 1) == doctest::Approx(1.0));
        CHECK(unit_delay(k, 0) == doctest::Approx(0.0));
        CHECK(unit_delay(k, 2) == doctest::Approx(0.0));
    }
}

TEST_CASE("each delay packet is delivered exactly once") {
    Vector alpha(3), p(3);
    alpha << 1.0, 1.0, 1.0;  // unit weights make arrivals visible at any lag
    p << 0.5, 0.3, 0.2;
    const int N = 5000;
    const Matrix path = sample_channel_path(DelayChannel{alpha, p}, N, 9);
    for (int l = 0; l + 2 < N; ++l) {
        int arrivals = 0;
        for (int i = 0; i <= 2; ++i) {
            if (path(l + i, i) != 0.0) {
                ++arrivals;
            }
        }
        CHECK(arrivals == 1);
    }
}

TEST_CASE("channel sampling matches the model moments") {
    const int N = 1000000;
    Vector alpha(3), p(3);
    alpha << 1.0, 0.67, 0.0;
    p << 0.6, 0.3, 0.1;
    const DelayChannel dc{alpha, p};
    const NoiseModel nm = channel_moments(ChannelSpec{dc});
    const Matrix path = sample_channel_path(ChannelSpec{dc}, N, 20240601);

    // per-lag empirical means within 3 standard errors
    for (int i = 0; i <= 2; ++i) {
        double mean = 0.0;
        int count = 0;
        for (int k = i; k < N; ++k) {
            mean += path(k, i);
            ++count;
        }
        mean /= count;
        const double se = std::sqrt(std::max(nm.beta(i, i), 1e-12) / count);
        CHECK(std::abs(mean - nm.mu(i)) <= 3.0 * se + 1e-9);
    }

    // same-packet covariance: pair gains that share a source instant
    for (int i = 0; i <= 2; ++i) {
        for (int j = i; j <= 2; ++j) {
            double acc = 0.0;
            int count = 0;
            for (int l = 0; l + 2 < N; ++l) {
                acc += (path(l + i, i) - nm.mu(i)) * (path(l + j, j) - nm.mu(j));
                ++count;
            }
            acc /= count;
            // crude 3-sigma bound with unit-order fourth moments
            CHECK(std::abs(acc - nm.beta(i, j)) <= 3.0 / std::sqrt(double(count)) + 1e-9);
        }
    }
}

TEST_CASE("gaussian channel sampling matches custom moments") {
    std::mt19937_64 gen(77);
    const Matrix beta = testing::random_psd(gen, 3);
    Vector mu(3);
    mu << 0.4, -0.2, 0.1;
    const NoiseModel nm(mu, beta);
    const int N = 400000;
    const Matrix path = sample_channel_path(ChannelSpec{nm}, N, 7);
    for (int i = 0; i <= 2; ++i) {
        double mean = 0.0;
        for (int k = i; k < N; ++k) {
            mean += path(k, i);
        }
        mean /= (N - i);
        const double se = std::sqrt(beta(i, i) / (N - i));
        CHECK(std::abs(mean - mu(i)) <= 3.5 * se + 1e-9);
    }
}

TEST_CASE("simulation reproducibility across thread counts") {
    const Plant plant = testing::example_plant(0.8);
    const SynthesisResult synth = synthesize(
        plant, delay_channel_noise(testing::example_alpha(), testing::example_probs(0.3)),
        FeedbackKind::Output);
    REQUIRE(synth.stabilizable);

    SimConfig config;
    config.horizon = 300;
    config.burn_in = 50;
    config.runs = 64;
    config.seed = 99;
    config.channel = DelayChannel{testing::example_alpha(), testing::example_probs(0.3)};

    const SimResult r1 = simulate_closed_loop(plant, *synth.K, config, 1, true);
    const SimResult r8 = simulate_closed_loop(plant, *synth.K, config, 8, true);
    CHECK(r1.mean_power_z == r8.mean_power_z);  // bit identical
    CHECK(r1.mean_power_u == r8.mean_power_u);
    CHECK(r1.ci_halfwidth == r8.ci_halfwidth);
    REQUIRE(r1.per_run_powers.size() == r8.per_run_powers.size());
    for (size_t i = 0; i < r1.per_run_powers.size(); ++i) {
        CHECK(r1.per_run_powers[i] == r8.per_run_powers[i]);
    }
}

TEST_CASE("open-loop power matches the H2 norm") {
    std::mt19937_64 gen(15);
    const Matrix A = testing::random_stable(gen, 3, 0.6);
    const Plant plant(A, testing::random_matrix(gen, 3, 1), testing::random_matrix(gen, 3, 1),
                      testing::random_matrix(gen, 1, 3), testing::random_matrix(gen, 2, 3),
                      Vector::Zero(1));
    const StateSpace open_loop(plant.A, plant.B1, plant.C1, Matrix::Zero(1, 1));
    const double expected = h2_norm_sq(open_loop);

    SimConfig config;
    config.horizon = 2000;
    config.burn_in = 200;
    config.runs = 400;
    config.seed = 5;
    config.channel = ErasureChannel{0.0};
    const SimResult res = simulate_closed_loop(plant, zero_controller(2), config, 2, false);
    CHECK(res.diverged == 0);
    CHECK(std::abs(res.mean_power_z - expected) <= 4.0 * res.ci_halfwidth + 0.01 * expected);
}

TEST_CASE("simulated power tracks the theoretical cost (worked example, reduced runs)") {
    const Plant plant = testing::example_plant(0.8);
    const NoiseModel noise =
        delay_channel_noise(testing::example_alpha(), testing::example_probs(0.3));
    const SynthesisResult synth = synthesize(plant, noise, FeedbackKind::Output);
    REQUIRE(synth.stabilizable);

    SimConfig config;
    config.horizon = 2000;
    config.burn_in = 200;
    config.runs = 1500;
    config.seed = 20240601;
    config.channel = DelayChannel{testing::example_alpha(), testing::example_probs(0.3)};
    const SimResult res = simulate_closed_loop(plant, *synth.K, config, 2, false);
    CHECK(res.diverged == 0);
    CHECK(std::abs(res.mean_power_z - synth.J_opt) <=
          std::max(3.0 * res.ci_halfwidth, 0.02 * synth.J_opt));
}

TEST_CASE("instability beyond the erasure threshold is flagged") {
    Matrix A(2, 2);
    A << 1.1, 0.0, 1.0, 1.2;
    const Vector B = Vector::Ones(2);
    const Plant plant(A, B, B, Matrix::Zero(1, 2), Matrix::Identity(2, 2), Vector::Ones(1));

    // design below the threshold, run the channel above it
    const SynthesisResult synth =
        synthesize(plant, erasure_channel_noise(0.3), FeedbackKind::State);
    REQUIRE(synth.stabilizable);

    SimConfig config;
    config.horizon = 4000;
    config.burn_in = 200;
    config.runs = 32;
    config.seed = 3;
    config.channel = ErasureChannel{0.75};  // threshold is 1/1.32^2 = 0.574
    const SimResult res = simulate_closed_loop(plant, *synth.K, config, 2, false);
    CHECK(res.diverged > 0);
}

TEST_CASE("sweep over the delay grid (reduced runs)") {
    const Plant plant = testing::example_plant(0.8);
    const ChannelSpec base = DelayChannel{testing::example_alpha(), testing::example_probs(0.0)};

    SweepSpec spec;
    spec.param = SweepSpec::Param::DelayMass;
    spec.grid = {0.0, 0.3, 0.6};
    spec.move_from = 0;
    spec.move_to = 1;

    SimConfig config;
    config.horizon = 1000;
    config.burn_in = 200;
    config.runs = 600;
    config.seed = 11;
    config.channel = base;

    const auto rows = sweep(plant, base, spec, config, FeedbackKind::Output, 2);
    REQUIRE(rows.size() == 3);
    for (const SweepPoint& row : rows) {
        CHECK(row.synthesized);
        CHECK(row.ms_stable);
        CHECK(std::isfinite(row.J_theory));
        CHECK(std::abs(row.J_sim - row.J_theory) <=
              std::max(4.0 * row.ci, 0.03 * row.J_theory));
    }
}

TEST_CASE("erasure sweep rows match the closed form") {
    Matrix A(2, 2);
    A << 1.1, 0.0, 1.0, 1.2;
    const Vector B = Vector::Ones(2);
    const Plant plant(A, B, B, Matrix::Zero(1, 2), Matrix::Identity(2, 2), Vector::Ones(1));

    SweepSpec spec;
    spec.param = SweepSpec::Param::ErasureRate;
    spec.grid = {0.0, 0.2, 0.4, 0.7};

    SimConfig config;
    config.horizon = 500;
    config.burn_in = 100;
    config.runs = 200;
    config.seed = 21;
    config.channel = ErasureChannel{0.0};

    const auto rows = sweep(plant, config.channel, spec, config, FeedbackKind::State, 2);
    REQUIRE(rows.size() == 4);
    const std::vector<Complex> eigs = {Complex(1.1, 0.0), Complex(1.2, 0.0)};
    for (size_t i = 0; i < 3; ++i) {
        CHECK(rows[i].synthesized);
        const ErasureClosedForm cf = erasure_closed_forms(eigs, spec.grid[i]);
        CHECK(rows[i].J_theory == doctest::Approx(cf.min_power).epsilon(1e-6));
    }
    CHECK(!rows[3].synthesized);  // 0.7 > 0.574: recorded in-row, sweep continued
}

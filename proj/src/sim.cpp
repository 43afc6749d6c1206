#include "msh2/sim.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <thread>

namespace msh2 {

namespace rng {

namespace {
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Stream::next_u64() {
    state += 0x9E3779B97F4A7C15ull;
    return mix64(state);
}

double Stream::uniform01() {
    // 53-bit mantissa in (0, 1]
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

double Stream::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
}

Stream run_stream(std::uint64_t seed, std::uint64_t run_index) {
    Stream s;
    s.state = mix64(seed ^ mix64(run_index + 0x632BE59BD9B4E019ull));
    return s;
}

}  // namespace rng

namespace {

int categorical(rng::Stream& stream, const Vector& probs) {
    const double u = stream.uniform01();
    double acc = 0.0;
    for (Index i = 0; i < probs.size(); ++i) {
        acc += probs(i);
        if (u <= acc) {
            return static_cast<int>(i);
        }
    }
    return static_cast<int>(probs.size()) - 1;
}

// Gain vector of the packet born at one source instant: entry i multiplies
// u(source) at time source + i.
struct PacketSampler {
    const ChannelSpec& channel;
    int tau;
    Matrix chol;  // factor of beta for the Gaussian case

    explicit PacketSampler(const ChannelSpec& ch) : channel(ch), tau(channel_horizon(ch)) {
        if (const DelayChannel* dc = std::get_if<DelayChannel>(&channel)) {
            if (dc->alpha.size() != dc->probs.size() || dc->alpha.size() == 0) {
                throw std::invalid_argument("channel: alpha and probs must have equal length");
            }
            if (dc->probs.minCoeff() < -1e-15 || std::abs(dc->probs.sum() - 1.0) > 1e-12) {
                throw std::invalid_argument("channel: delay probabilities must form a simplex");
            }
        }
        if (const ErasureChannel* ec = std::get_if<ErasureChannel>(&channel)) {
            if (ec->e < 0.0 || ec->e > 1.0) {
                throw std::invalid_argument("channel: erasure rate must lie in [0,1]");
            }
        }
        if (const NoiseModel* nm = std::get_if<NoiseModel>(&channel)) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(nm->beta);
            if (es.eigenvalues().minCoeff() <
                -kPsdTol * std::max(1.0, nm->beta.cwiseAbs().maxCoeff())) {
                throw std::invalid_argument("sample_channel_path: beta is not PSD");
            }
            const Vector lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            chol = es.eigenvectors() * lam.asDiagonal();
        }
    }

    void draw(rng::Stream& stream, Vector& gain) const {
        if (const DelayChannel* dc = std::get_if<DelayChannel>(&channel)) {
            gain.setZero();
            const int d = categorical(stream, dc->probs);
            gain(d) = dc->alpha(d);
        } else if (const ErasureChannel* ec = std::get_if<ErasureChannel>(&channel)) {
            gain(0) = (stream.uniform01() > ec->e) ? 1.0 : 0.0;
        } else {
            const NoiseModel& nm = std::get<NoiseModel>(channel);
            Vector g(tau + 1);
            for (Index i = 0; i <= tau; ++i) {
                g(i) = stream.normal();
            }
            gain = nm.mu + chol * g;
        }
    }
};

double pairwise_sum(const double* data, size_t count) {
    if (count <= 8) {
        double acc = 0.0;
        for (size_t i = 0; i < count; ++i) {
            acc += data[i];
        }
        return acc;
    }
    const size_t half = count / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, count - half);
}

}  // namespace

NoiseModel channel_moments(const ChannelSpec& channel) {
    if (const DelayChannel* dc = std::get_if<DelayChannel>(&channel)) {
        return delay_channel_noise(dc->alpha, dc->probs);
    }
    if (const ErasureChannel* ec = std::get_if<ErasureChannel>(&channel)) {
        return erasure_channel_noise(ec->e);
    }
    return std::get<NoiseModel>(channel);
}

int channel_horizon(const ChannelSpec& channel) {
    if (const DelayChannel* dc = std::get_if<DelayChannel>(&channel)) {
        return static_cast<int>(dc->alpha.size()) - 1;
    }
    if (std::holds_alternative<ErasureChannel>(channel)) {
        return 0;
    }
    return std::get<NoiseModel>(channel).horizon();
}

Matrix sample_channel_path(const ChannelSpec& channel, int horizon, std::uint64_t seed) {
    const int tau = channel_horizon(channel);
    PacketSampler sampler(channel);
    rng::Stream stream = rng::run_stream(seed, 0);

    Matrix gains = Matrix::Zero(horizon, tau + 1);
    Vector packet(tau + 1);
    for (int l = 0; l < horizon; ++l) {
        sampler.draw(stream, packet);
        for (int i = 0; i <= tau && l + i < horizon; ++i) {
            gains(l + i, i) = packet(i);
        }
    }
    return gains;
}

SimResult simulate_closed_loop(const Plant& plant, const Controller& controller,
                               const SimConfig& config, int threads, bool keep_per_run) {
    if (config.runs < 1) {
        throw std::invalid_argument("simulate_closed_loop: runs must be >= 1");
    }
    if (config.burn_in < 0 || config.burn_in >= config.horizon) {
        throw std::invalid_argument("simulate_closed_loop: burn_in must lie in [0, horizon)");
    }
    const StateSpace& K = controller.K;
    const Index n = plant.n();
    const Index nk = K.order();
    const Matrix C2eff =
        controller.reads_state ? Matrix(Matrix::Identity(n, n)) : Matrix(plant.C2);
    if (K.inputs() != C2eff.rows() || K.outputs() != 1) {
        throw std::invalid_argument("simulate_closed_loop: controller dimension mismatch");
    }

    const int tau = channel_horizon(config.channel);
    PacketSampler sampler(config.channel);
    const int window = tau + 1;
    const int sample_count = config.horizon - config.burn_in;

    std::vector<double> run_power_z(config.runs, 0.0);
    std::vector<double> run_power_u(config.runs, 0.0);
    std::vector<std::uint8_t> run_diverged(config.runs, 0);

    const auto worker = [&](int run_begin, int run_end) {
        Vector x(n), x_next(n), xk(nk), xk_next(nk), y(C2eff.rows());
        Vector z(plant.p()), packet(window);
        std::vector<Vector> packets(window, Vector::Zero(window));
        std::vector<double> u_hist(window, 0.0);

        for (int r = run_begin; r < run_end; ++r) {
            rng::Stream stream = rng::run_stream(config.seed, static_cast<std::uint64_t>(r));
            x.setZero();
            xk.setZero();
            for (auto& p : packets) {
                p.setZero();
            }
            std::fill(u_hist.begin(), u_hist.end(), 0.0);

            double acc_z = 0.0;
            double acc_u = 0.0;
            bool diverged = false;

            for (int k = 0; k < config.horizon; ++k) {
                const double w = stream.normal();
                if (controller.reads_state) {
                    y = x;
                } else {
                    y.noalias() = C2eff * x;
                }
                double u = (K.D * y)(0);
                if (nk > 0) {
                    u += (K.C * xk)(0);
                }

                const int slot = k % window;
                sampler.draw(stream, packets[slot]);
                u_hist[slot] = u;

                double u_d = 0.0;
                for (int i = 0; i <= tau && i <= k; ++i) {
                    const int src = (k - i) % window;
                    u_d += packets[src](i) * u_hist[src];
                }

                z.noalias() = plant.C1 * x;
                z += plant.D * u_d;
                if (k >= config.burn_in) {
                    acc_z += z.squaredNorm();
                    acc_u += u * u;
                }

                x_next.noalias() = plant.A * x;
                x_next += plant.B1 * w + plant.B2 * u_d;
                if (nk > 0) {
                    xk_next.noalias() = K.A * xk;
                    xk_next += K.B * y;
                    xk.swap(xk_next);
                }
                x.swap(x_next);

                if (x.cwiseAbs().maxCoeff() > 1e12) {
                    diverged = true;
                    break;
                }
            }

            if (diverged) {
                run_diverged[r] = 1;
                run_power_z[r] = std::numeric_limits<double>::quiet_NaN();
                run_power_u[r] = std::numeric_limits<double>::quiet_NaN();
            } else {
                run_power_z[r] = acc_z / sample_count;
                run_power_u[r] = acc_u / sample_count;
            }
        }
    };

    threads = std::max(1, threads);
    if (threads == 1 || config.runs == 1) {
        worker(0, config.runs);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (config.runs + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int lo = t * chunk;
            const int hi = std::min(config.runs, lo + chunk);
            if (lo < hi) {
                pool.emplace_back(worker, lo, hi);
            }
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    SimResult result;
    std::vector<double> valid_z;
    std::vector<double> valid_u;
    valid_z.reserve(config.runs);
    valid_u.reserve(config.runs);
    for (int r = 0; r < config.runs; ++r) {
        if (run_diverged[r]) {
            ++result.diverged;
        } else {
            valid_z.push_back(run_power_z[r]);
            valid_u.push_back(run_power_u[r]);
        }
    }
    if (!valid_z.empty()) {
        const auto count = valid_z.size();
        result.mean_power_z = pairwise_sum(valid_z.data(), count) / static_cast<double>(count);
        result.mean_power_u = pairwise_sum(valid_u.data(), count) / static_cast<double>(count);
        if (count > 1) {
            std::vector<double> sq(count);
            for (size_t i = 0; i < count; ++i) {
                const double d = valid_z[i] - result.mean_power_z;
                sq[i] = d * d;
            }
            const double var =
                pairwise_sum(sq.data(), count) / static_cast<double>(count - 1);
            result.ci_halfwidth = 1.96 * std::sqrt(var / static_cast<double>(count));
        }
    }
    if (keep_per_run) {
        result.per_run_powers = run_power_z;
    }
    return result;
}

ChannelSpec sweep_channel_at(const ChannelSpec& base, const SweepSpec& spec, double value) {
    if (spec.param == SweepSpec::Param::ErasureRate) {
        return ErasureChannel{value};
    }
    const DelayChannel* dc = std::get_if<DelayChannel>(&base);
    if (dc == nullptr) {
        throw std::invalid_argument("sweep: delay-mass parameter requires a delay channel");
    }
    DelayChannel moved = *dc;
    moved.probs(spec.move_from) -= value;
    moved.probs(spec.move_to) += value;
    return moved;
}

std::vector<SweepPoint> sweep(const Plant& plant, const ChannelSpec& base_channel,
                              const SweepSpec& spec, const SimConfig& config,
                              FeedbackKind feedback, int threads) {
    if (spec.grid.empty()) {
        throw std::invalid_argument("sweep: empty grid");
    }
    std::vector<SweepPoint> rows;
    rows.reserve(spec.grid.size());
    for (const double value : spec.grid) {
        SweepPoint row;
        row.param = value;
        try {
            const ChannelSpec channel = sweep_channel_at(base_channel, spec, value);
            const NoiseModel noise = channel_moments(channel);
            const SynthesisResult synth = synthesize(plant, noise, feedback);
            if (!synth.stabilizable) {
                row.note = synth.message;
                rows.push_back(std::move(row));
                continue;
            }
            row.synthesized = true;

            const SpectralModel sm = spectral_model_from_noise(noise);
            const NominalClosedLoop loop = close_nominal(plant, sm, *synth.K);
            const StabilityReport rep = ms_stability(loop, sm);
            row.J_theory = rep.J_H2;
            row.ms_stable = rep.ms_stable;
            row.rho_ghat = rep.rho;
            row.margin = rep.margin;

            SimConfig point_config = config;
            point_config.channel = channel;
            const SimResult sim =
                simulate_closed_loop(plant, *synth.K, point_config, threads, false);
            row.J_sim = sim.mean_power_z;
            row.ci = sim.ci_halfwidth;
            if (sim.diverged > 0) {
                row.note = "diverged runs: " + std::to_string(sim.diverged);
            }
        } catch (const std::exception& ex) {
            row.note = ex.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace msh2

#pragma once

#include "msh2/analysis.hpp"

#include <cstdint>
#include <variant>

namespace msh2 {

struct DelayChannel {
    Vector alpha;
    Vector probs;
};

struct ErasureChannel {
    double e = 0.0;
};

/// Sampled channel description: exact delay/erasure mechanisms, or a generic
/// Gaussian channel matching given first and second moments.
using ChannelSpec = std::variant<DelayChannel, ErasureChannel, NoiseModel>;

NoiseModel channel_moments(const ChannelSpec& channel);
int channel_horizon(const ChannelSpec& channel);

struct SimConfig {
    int horizon = 2000;
    int runs = 1;
    std::uint64_t seed = 1;
    int burn_in = 200;
    ChannelSpec channel;
};

struct SimResult {
    double mean_power_z = std::numeric_limits<double>::quiet_NaN();
    double mean_power_u = std::numeric_limits<double>::quiet_NaN();
    double ci_halfwidth = 0.0;  // 95% normal-approximation half width for z
    std::vector<double> per_run_powers;
    int diverged = 0;
};

/// Realized channel gains; row k holds omega(k, k-i) for i = 0..tau (zero for
/// sources before the start of the run).
Matrix sample_channel_path(const ChannelSpec& channel, int horizon, std::uint64_t seed);

/// Seeded Monte-Carlo simulation of the true stochastic loop. Runs use
/// substreams keyed by (seed, run index) and aggregate with pairwise
/// summation, so the result is bit-identical for any thread count.
SimResult simulate_closed_loop(const Plant& plant, const Controller& controller,
                               const SimConfig& config, int threads = 1,
                               bool keep_per_run = false);

struct SweepSpec {
    enum class Param { ErasureRate, DelayMass };
    Param param = Param::ErasureRate;
    std::vector<double> grid;
    // DelayMass: probability mass moved from probs[move_from] to probs[move_to].
    int move_from = 0;
    int move_to = 1;
};

struct SweepPoint {
    double param = 0.0;
    double J_theory = std::numeric_limits<double>::quiet_NaN();
    double J_sim = std::numeric_limits<double>::quiet_NaN();
    double ci = std::numeric_limits<double>::quiet_NaN();
    bool ms_stable = false;
    double rho_ghat = std::numeric_limits<double>::quiet_NaN();
    double margin = std::numeric_limits<double>::quiet_NaN();
    bool synthesized = false;
    std::string note;
};

ChannelSpec sweep_channel_at(const ChannelSpec& base, const SweepSpec& spec, double value);

/// Per grid point: synthesize, evaluate the theoretical cost, simulate.
/// Synthesis failures are recorded in the row and the sweep continues.
std::vector<SweepPoint> sweep(const Plant& plant, const ChannelSpec& base_channel,
                              const SweepSpec& spec, const SimConfig& config,
                              FeedbackKind feedback, int threads = 1);

namespace rng {

/// Counter-based stream (SplitMix64): the state advances by a fixed odd
/// constant and each output is a strong mix of the counter. Substreams for
/// (seed, run) pairs are decorrelated by hashing the key.
struct Stream {
    std::uint64_t state = 0;

    std::uint64_t next_u64();
    double uniform01();  // in (0, 1]
    double normal();     // standard normal, Box-Muller pair

  private:
    bool has_cached_ = false;
    double cached_ = 0.0;
};

Stream run_stream(std::uint64_t seed, std::uint64_t run_index);

}  // namespace rng

}  // namespace msh2

#pragma once

#include "msh2/types.hpp"

namespace msh2 {

/// Plant realization
///   x(k+1) = A x(k) + B1 w(k) + B2 u_d(k)
///   z(k)   = C1 x(k) + D u_d(k)
///   y(k)   = C2 x(k)
/// with scalar disturbance w and scalar corrupted control u_d. The measurement
/// channel is strictly proper by construction (there is no D22 slot).
struct Plant {
    Matrix A;   // n x n
    Vector B1;  // n
    Vector B2;  // n
    Matrix C1;  // p x n
    Matrix C2;  // q x n
    Vector D;   // p

    Plant(Matrix A_, Vector B1_, Vector B2_, Matrix C1_, Matrix C2_, Vector D_);

    Index n() const { return A.rows(); }
    Index p() const { return C1.rows(); }
    Index q() const { return C2.rows(); }
};

/// First- and second-order description of the finite-impulse-response
/// multiplicative channel noise: per-lag means mu_i and the covariance
/// beta_{i,j} of gains sharing the same source instant.
struct NoiseModel {
    Vector mu;    // length horizon+1
    Matrix beta;  // (horizon+1) x (horizon+1), symmetric PSD

    NoiseModel(Vector mu_, Matrix beta_);

    int horizon() const { return static_cast<int>(mu.size()) - 1; }
};

struct Check {
    bool ok = false;
    double margin = 0.0;
};

struct AssumptionReport {
    Check stabilizable_AB2;
    Check no_unit_circle_unobservable_AC1;
    Check detectable_AC2;
    Check no_unit_circle_unstabilizable;
    Check H_nonzero_at_unstable_poles;
    Check Gy_minimum_phase;
    Check C2Psi_full_column_rank;
    int r1 = 0;
    int r2 = 0;
    std::vector<Complex> unstable_poles;
    std::string notes;

    // All checks, as required by the output-feedback synthesis.
    bool pass() const;
    // Only the checks the state-feedback design relies on (the observer-side
    // conditions are not needed when the full state is fed back).
    bool pass_state_feedback() const;
};

/// Random multi-step delay channel: u_d(k) = sum_i alpha_i delta(tau_{k-i}-i) u(k-i)
/// with i.i.d. delays tau ~ probs. Moments: mu_i = alpha_i p_i,
/// beta_{i,j} = delta(i-j) alpha_i^2 p_i - alpha_i alpha_j p_i p_j.
NoiseModel delay_channel_noise(const Vector& alpha, const Vector& probs);

/// Memoryless analog erasure channel with erasure probability e:
/// horizon 0, mu_0 = 1-e, beta_0 = e(1-e).
NoiseModel erasure_channel_noise(double e);

/// Smallest r >= 1 with C A^{r-1} B != 0 (scale-aware test). Throws
/// std::domain_error when the channel is identically zero (no r <= n).
int relative_degree(const Matrix& A, const Vector& B, const Matrix& C);

/// Finite transmission zeros of the system C (zI - A)^{-1} B (no feedthrough).
/// Sets `degenerate` when the system pencil is rank-deficient for every z
/// (the transfer matrix is not left/right invertible).
std::vector<Complex> transmission_zeros(const Matrix& A, const Matrix& B,
                                        const Matrix& C, bool* degenerate = nullptr);

/// Checks the standing structural assumptions on the plant against the mean
/// polynomial H (coefficient vector of z^0, z^-1, ...).
AssumptionReport validate_assumptions(const Plant& plant, const Vector& H);

}  // namespace msh2

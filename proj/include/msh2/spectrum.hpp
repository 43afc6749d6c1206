#pragma once

#include "msh2/model.hpp"

namespace msh2 {

/// One-sided autocorrelation r(0..horizon) of the channel uncertainty's
/// impulse response; r(-k) = r(k) is implied.
struct LaurentSpectrum {
    Vector r;

    int horizon() const { return static_cast<int>(r.size()) - 1; }
};

/// Mean polynomial H(z) = sum mu_i z^-i and minimum-phase spectral factor
/// Phi(z) = sum phi_i z^-i of the uncertainty, sharing one state space:
///   [H(z) Phi(z)] = Chat (zI - Ahat)^{-1} [Bhat1 Bhat2] + [Dhat1 Dhat2].
struct SpectralModel {
    Vector H;    // mu_0 .. mu_tau
    Vector Phi;  // phi_0 .. phi_tau
    Matrix Ahat;
    Vector Bhat1, Bhat2;
    RowVector Chat;
    double Dhat1 = 0.0;
    double Dhat2 = 0.0;

    int horizon() const { return static_cast<int>(H.size()) - 1; }
    // True when the uncertainty vanishes identically (beta == 0): Phi == 0.
    bool noise_free() const;

    StateSpace mean_system() const;    // (Ahat, Bhat1, Chat, Dhat1)
    StateSpace factor_system() const;  // (Ahat, Bhat2, Chat, Dhat2)
};

/// r(lambda) = sum_{i=0}^{tau-lambda} beta_{i,i+lambda}.
LaurentSpectrum autocorrelation(const NoiseModel& noise);

/// Minimum-phase factor with Phi(z) Phi(z^-1) = S(z), phi_0 > 0. Throws
/// std::invalid_argument when S is negative on the frequency grid and
/// std::domain_error when S has zeros on the unit circle (no strictly
/// minimum-phase factor exists).
Vector spectral_factorize(const LaurentSpectrum& spectrum);

/// Observable-companion realization shared by H and Phi; both impulse
/// responses are replayed and checked against the coefficients.
SpectralModel shared_realization(const Vector& H, const Vector& Phi);

/// Full pipeline: autocorrelation + factorization + shared realization.
/// A vanishing spectrum (beta == 0) yields the noise-free model Phi == 0.
SpectralModel spectral_model_from_noise(const NoiseModel& noise);

/// S(e^{j theta}) evaluated on a uniform frequency grid.
Vector spectrum_on_grid(const LaurentSpectrum& spectrum, int grid_points = 1024);

}  // namespace msh2

#pragma once

#include "msh2/riccati.hpp"

#include <optional>

namespace msh2 {

/// Closed loop of plant, mean channel system and controller with the
/// uncertainty input cut open: maps (w, d) to (z, u). The first p outputs
/// are z, the last one is u.
struct NominalClosedLoop {
    StateSpace G;
    Index p = 0;  // number of z rows

    StateSpace G_zw() const;
    StateSpace G_zd() const;
    StateSpace G_uw() const;
    StateSpace G_ud() const;
};

struct StabilityReport {
    Matrix g_hat = Matrix::Zero(2, 2);  // squared norms, sigma0-weighted w column
    double rho = 0.0;                   // spectral radius of g_hat
    bool ms_stable = false;
    bool marginal = false;  // verdict within 1e-8 of the stability boundary
    double margin = 0.0;    // 1 - |G_ud Phi|_2^2
    double J_H2 = std::numeric_limits<double>::quiet_NaN();
    double norm_zw_sq = 0.0, norm_uw_sq = 0.0, norm_zd_phi_sq = 0.0, norm_ud_phi_sq = 0.0;
};

/// Builds the nominal loop; throws std::domain_error (listing the unstable
/// eigenvalues) when the controller does not internally stabilize it.
NominalClosedLoop close_nominal(const Plant& plant, const SpectralModel& noise,
                                const Controller& controller);

/// Mean-square stability and performance of the nominal loop against the
/// spectral factor: margin test, 2x2 gain matrix for the sigma0 probe, and
///   J_H2 = |G_zw|^2 + |G_uw|^2 (1 - |G_ud Phi|^2)^{-1} |G_zd Phi|^2.
StabilityReport ms_stability(const NominalClosedLoop& loop, const SpectralModel& noise,
                             double sigma0 = 1.0);

/// Diagonal scaling certificate: when rho of the sigma0-weighted gain matrix
/// is below 1, returns gamma^2 such that Gamma = diag{1, gamma^2} brings both
/// weighted column sums strictly below 1; nullopt otherwise.
std::optional<double> scaling_certificate(const Matrix& g_hat, double sigma0 = 1.0);

struct MomentOracleResult {
    double rho_moment = 0.0;
    double power_z = std::numeric_limits<double>::quiet_NaN();
    double power_u = std::numeric_limits<double>::quiet_NaN();
};

/// Exact propagation of the second moment of the lifted closed-loop state
/// [x; x_K; u(k-1..k-tau); unused packet tails]. Independent of the H2-norm
/// machinery; used as the desk-scale oracle for the stability and
/// performance formulas. Caps: tau <= 3 and n + n_K <= 12.
MomentOracleResult moment_oracle(const Plant& plant, const NoiseModel& noise,
                                 const Controller& controller);

}  // namespace msh2

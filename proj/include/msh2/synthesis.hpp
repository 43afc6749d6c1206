#pragma once

#include "msh2/spectrum.hpp"

#include <limits>
#include <optional>

namespace msh2 {

/// Auxiliary plant of the augmented design problem. The state stacks the
/// plant state with the shared noise-filter state:
///   Abar = [A, B2*Chat; 0, Ahat],  Bbar1 = [B1; 0],
///   Bbar2 = [B2*Dhat2; Bhat2],     Btilde2 = [B2*Dhat1; Bhat1],
///   Cbar1 = [C1, D*Chat; 0, 0],    Cbar2 = [C2, 0],
///   Dbar11 = [0, D*Dhat2; 0, 0],   Dbar12 = [D*Dhat1; 0].
/// The original plant and spectral model are kept alongside; the cost
/// formulas and the mean-square margin test need them.
struct AugmentedPlant {
    Matrix Abar;
    Vector Bbar1, Bbar2, Btilde2;
    Matrix Cbar1;
    Matrix Cbar2;
    Matrix Dbar11;
    Vector Dbar12;
    int r1 = 1, r2 = 1;
    Matrix PsiBar;  // [Abar^{r1-1} Bbar1, Abar^{r2-1} Bbar2]

    Plant plant;
    SpectralModel noise;

    AugmentedPlant(Plant plant_, SpectralModel noise_)
        : plant(std::move(plant_)), noise(std::move(noise_)) {}

    Index order() const { return Abar.rows(); }
    // Uncertainty entry direction [B2; 0] (d enters the plant state only).
    Vector Bd() const;
};

/// Weights of the scalarized design constraints; only the explicit-observer
/// verification path uses them (the synthesis pipeline itself has no
/// parameter search).
struct AnalysisWeights {
    double sigma0 = 1.0;
    double gamma = 1.0;
    double lambda0 = 1.0;
    double lambda1 = 0.0;

    AnalysisWeights(double sigma0_, double gamma_, double lambda0_, double lambda1_);
};

enum class FeedbackKind { Output, State };

/// Controller state-space; `reads_state` controllers take the full plant
/// state x as their input instead of y.
struct Controller {
    StateSpace K;
    bool reads_state = false;
};

struct SynthesisResult {
    Matrix X;
    RowVector F;
    Matrix L;
    RowVector L0;
    std::optional<Controller> K;
    double J_opt = 0.0;
    double ms_margin = 0.0;
    int iterations = 0;
    double residual = 0.0;
    bool stabilizable = false;
    std::string message;
};

AugmentedPlant build_augmented_plant(const Plant& plant, const SpectralModel& noise);

/// phi0(X) = Bbar1' Abar'^{r1-1} X Abar^{r1-1} Bbar1
///           + sum_{j=0}^{r1-2} |Cbar1 Abar^j Bbar1|^2.
double phi0(const AugmentedPlant& ap, const Matrix& X);

/// phi1(X) = Bbar2' Abar'^{r2-1} X Abar^{r2-1} Bbar2
///           + sum_{j=0}^{r2-2} |Cbar1 Abar^j Bbar2|^2 + Dhat2^2 D'D.
double phi1(const AugmentedPlant& ap, const Matrix& X);

// Decomposition phi1(X) = w' X w + c used by the Riccati iteration.
Vector phi1_direction(const AugmentedPlant& ap);
double phi1_constant(const AugmentedPlant& ap);

/// F = -[M(X) + Btilde2' X Btilde2]^{-1} (Btilde2' X Abar + Dbar12' Cbar1)
/// with M(X) = phi1(X) + Dbar12' Dbar12.
RowVector optimal_state_feedback(const AugmentedPlant& ap, const Matrix& X);

/// L = -Abar PsiBar (Cbar2 PsiBar)^+, L0 = F PsiBar (Cbar2 PsiBar)^+.
std::pair<Matrix, RowVector> observer_gains(const AugmentedPlant& ap, const RowVector& F);

/// K = [Abar + Btilde2 F + L Cbar2 - Btilde2 L0 Cbar2 | Btilde2 L0 - L]
///     [F - L0 Cbar2                                  | L0           ]
Controller assemble_controller(const AugmentedPlant& ap, const RowVector& F, const Matrix& L,
                               const RowVector& L0);

/// State-feedback law u = F [x; xhat] wired as a controller that reads x and
/// reproduces the noise-filter state internally (it is driven by u only).
Controller assemble_state_feedback_controller(const AugmentedPlant& ap, const RowVector& F);

/// Minimum cost B1' A'^{r1-1} X11 A^{r1-1} B1 + sum_{j<=r1-2} |C1 A^j B1|^2
/// with X11 the upper-left n x n block of X.
double optimal_cost(const Plant& plant, const Matrix& X);

struct ErasureClosedForm {
    bool stabilizable = false;
    double min_power = std::numeric_limits<double>::infinity();
    double threshold = 0.0;  // critical erasure rate M^-2
};

/// Erasure-channel closed forms: stabilizable iff e < M^-2 with
/// M = prod |lambda_i| over the unstable eigenvalues; minimum average control
/// power (M^2 - 1) / (1 - e M^2).
ErasureClosedForm erasure_closed_forms(const std::vector<Complex>& eigenvalues, double e);

/// Stabilizing solution of the observer-side Riccati equation, explicit under
/// minimum phase and left invertibility:
///   Y = sum_{i<r1} Abar^i Bbar1 (sigma0 lambda0)^2 Bbar1' Abar'^i
///     + sum_{i<r2} Abar^i Bbar2 (lambda1/gamma)^2 Bbar2' Abar'^i.
Matrix explicit_observer_y(const AugmentedPlant& ap, const AnalysisWeights& w);

/// Scaled residual of Y against
/// Y = Abar Y Abar' + (sigma0 lambda0)^2 Bbar1 Bbar1' + (lambda1/gamma)^2 Bbar2 Bbar2'
///     - Abar Y Cbar2' (Cbar2 Y Cbar2')^+ Cbar2 Y Abar'.
double observer_y_residual(const AugmentedPlant& ap, const AnalysisWeights& w, const Matrix& Y);

/// Full design pipeline: spectral model -> augmented plant -> MARE -> gains.
/// Returns stabilizable = false (with message) instead of throwing when the
/// plant is not mean-square stabilizable over the given channel.
SynthesisResult synthesize(const Plant& plant, const NoiseModel& noise, FeedbackKind feedback);

}  // namespace msh2

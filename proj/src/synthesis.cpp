#include "msh2/synthesis.hpp"

#include "msh2/riccati.hpp"

#include <cmath>
#include <sstream>

namespace msh2 {

Vector AugmentedPlant::Bd() const {
    Vector b = Vector::Zero(order());
    b.head(plant.n()) = plant.B2;
    return b;
}

AnalysisWeights::AnalysisWeights(double sigma0_, double gamma_, double lambda0_, double lambda1_)
    : sigma0(sigma0_), gamma(gamma_), lambda0(lambda0_), lambda1(lambda1_) {
    if (!(sigma0 > 0.0) || !(gamma > 0.0)) {
        throw std::invalid_argument("AnalysisWeights: sigma0 and gamma must be positive");
    }
    if (std::abs(lambda0 * lambda0 + lambda1 * lambda1 - 1.0) > 1e-9) {
        throw std::invalid_argument("AnalysisWeights: lambda0^2 + lambda1^2 must equal 1");
    }
}

AugmentedPlant build_augmented_plant(const Plant& plant, const SpectralModel& noise) {
    const Index n = plant.n();
    const Index p = plant.p();
    const Index q = plant.q();
    const int tau = noise.horizon();
    const Index m = n + tau;

    const double phi_scale = noise.Phi.cwiseAbs().maxCoeff();
    const bool noise_free = noise.noise_free();
    if (!noise_free && std::abs(noise.Dhat2) <= kRankTol * phi_scale) {
        throw std::domain_error(
            "build_augmented_plant: degenerate spectral factor (Dhat2 = 0 with nonzero tail)");
    }

    AugmentedPlant ap(plant, noise);

    ap.Abar = Matrix::Zero(m, m);
    ap.Abar.topLeftCorner(n, n) = plant.A;
    if (tau > 0) {
        ap.Abar.topRightCorner(n, tau) = plant.B2 * noise.Chat;
        ap.Abar.bottomRightCorner(tau, tau) = noise.Ahat;
    }

    ap.Bbar1 = Vector::Zero(m);
    ap.Bbar1.head(n) = plant.B1;

    ap.Bbar2 = Vector::Zero(m);
    ap.Bbar2.head(n) = plant.B2 * noise.Dhat2;
    ap.Bbar2.tail(tau) = noise.Bhat2;

    ap.Btilde2 = Vector::Zero(m);
    ap.Btilde2.head(n) = plant.B2 * noise.Dhat1;
    ap.Btilde2.tail(tau) = noise.Bhat1;

    ap.Cbar1 = Matrix::Zero(p + 1, m);
    ap.Cbar1.topLeftCorner(p, n) = plant.C1;
    if (tau > 0) {
        ap.Cbar1.block(0, n, p, tau) = plant.D * noise.Chat;
    }

    ap.Cbar2 = Matrix::Zero(q, m);
    ap.Cbar2.leftCols(n) = plant.C2;

    ap.Dbar11 = Matrix::Zero(p + 1, 2);
    ap.Dbar11.block(0, 1, p, 1) = plant.D * noise.Dhat2;

    ap.Dbar12 = Vector::Zero(p + 1);
    ap.Dbar12.head(p) = plant.D * noise.Dhat1;

    ap.r1 = relative_degree(plant.A, plant.B1, plant.C2);
    ap.r2 = relative_degree(plant.A, plant.B2, plant.C2);

    // The augmentation must not change the measured relative degrees
    // (the noise filter only reshapes the control path behind Dhat2 != 0).
    const int r1_aug = relative_degree(ap.Abar, ap.Bbar1, ap.Cbar2);
    if (r1_aug != ap.r1) {
        std::ostringstream os;
        os << "build_augmented_plant: augmented w-channel relative degree " << r1_aug
           << " != " << ap.r1;
        throw std::runtime_error(os.str());
    }
    if (!noise_free) {
        const int r2_aug = relative_degree(ap.Abar, ap.Bbar2, ap.Cbar2);
        if (r2_aug != ap.r2) {
            std::ostringstream os;
            os << "build_augmented_plant: augmented control-channel relative degree " << r2_aug
               << " != " << ap.r2;
            throw std::runtime_error(os.str());
        }
    }

    ap.PsiBar = Matrix::Zero(m, 2);
    ap.PsiBar.col(0) = matrix_power(ap.Abar, ap.r1 - 1) * ap.Bbar1;
    ap.PsiBar.col(1) = matrix_power(ap.Abar, ap.r2 - 1) * ap.Bbar2;
    if (noise_free && tau == 0) {
        // The observer projector is invariant under column scaling, so the
        // memoryless vanishing-noise limit of Bbar2/Dhat2 = B2 is exact; this
        // keeps the classical design reachable at zero uncertainty.
        ap.PsiBar.col(1) = matrix_power(plant.A, ap.r2 - 1) * plant.B2;
    }
    return ap;
}

double phi0(const AugmentedPlant& ap, const Matrix& X) {
    const Vector w = matrix_power(ap.Abar, ap.r1 - 1) * ap.Bbar1;
    double value = w.dot(X * w);
    Vector v = ap.Bbar1;
    for (int j = 0; j <= ap.r1 - 2; ++j) {
        value += (ap.Cbar1 * v).squaredNorm();
        v = ap.Abar * v;
    }
    return value;
}

Vector phi1_direction(const AugmentedPlant& ap) {
    return matrix_power(ap.Abar, ap.r2 - 1) * ap.Bbar2;
}

double phi1_constant(const AugmentedPlant& ap) {
    double value = ap.noise.Dhat2 * ap.noise.Dhat2 * ap.plant.D.squaredNorm();
    Vector v = ap.Bbar2;
    for (int j = 0; j <= ap.r2 - 2; ++j) {
        value += (ap.Cbar1 * v).squaredNorm();
        v = ap.Abar * v;
    }
    return value;
}

double phi1(const AugmentedPlant& ap, const Matrix& X) {
    const Vector w = phi1_direction(ap);
    return w.dot(X * w) + phi1_constant(ap);
}

RowVector optimal_state_feedback(const AugmentedPlant& ap, const Matrix& X) {
    const double inner = phi1(ap, X) + ap.Dbar12.squaredNorm() + ap.Btilde2.dot(X * ap.Btilde2);
    if (!(inner > 0.0)) {
        throw std::runtime_error("optimal_state_feedback: singular inner matrix");
    }
    const Vector g = ap.Abar.transpose() * (X * ap.Btilde2) + ap.Cbar1.transpose() * ap.Dbar12;
    return (-g.transpose() / inner).eval();
}

std::pair<Matrix, RowVector> observer_gains(const AugmentedPlant& ap, const RowVector& F) {
    if (ap.noise.noise_free() && ap.noise.horizon() > 0) {
        // With memory, the vanishing-noise limit of the filter column depends
        // on the factor's shape; there is no well-posed observer here.
        throw std::domain_error(
            "observer_gains: output-feedback design needs a nondegenerate spectral factor "
            "for channels with memory");
    }
    const Matrix N = ap.Cbar2 * ap.PsiBar;

    // Columns of PsiBar that vanish identically (noise-free factor) carry no
    // rank requirement; a deficient nonzero column means the left-invertibility
    // assumption fails.
    Index required = 0;
    for (Index j = 0; j < ap.PsiBar.cols(); ++j) {
        if (ap.PsiBar.col(j).norm() > 0.0) {
            ++required;
        }
    }
    Eigen::JacobiSVD<Matrix> svd(N);
    const Vector& sv = svd.singularValues();
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > kRankTol * sv(0)) {
            ++rank;
        }
    }
    if (rank < required) {
        throw std::domain_error("observer_gains: Cbar2 PsiBar is column-rank deficient");
    }

    const Matrix Ninv = pseudo_inverse(N, kRankTol);
    Matrix L = -ap.Abar * ap.PsiBar * Ninv;
    RowVector L0 = F * ap.PsiBar * Ninv;
    return {std::move(L), std::move(L0)};
}

Controller assemble_controller(const AugmentedPlant& ap, const RowVector& F, const Matrix& L,
                               const RowVector& L0) {
    const Matrix AK =
        ap.Abar + ap.Btilde2 * F + L * ap.Cbar2 - ap.Btilde2 * (L0 * ap.Cbar2);
    const Matrix BK = ap.Btilde2 * L0 - L;
    const Matrix CK = F - L0 * ap.Cbar2;
    const Matrix DK = L0;
    return Controller{StateSpace(AK, BK, CK, DK), false};
}

Controller assemble_state_feedback_controller(const AugmentedPlant& ap, const RowVector& F) {
    const Index n = ap.plant.n();
    const int tau = ap.noise.horizon();
    const RowVector F1 = F.head(n);
    const RowVector F2 = F.tail(tau);

    // The noise-filter state is driven by u alone, so the controller can
    // reproduce it exactly from its own output history.
    const Matrix AK = ap.noise.Ahat + ap.noise.Bhat1 * F2;
    const Matrix BK = ap.noise.Bhat1 * F1;
    const Matrix CK = F2;
    const Matrix DK = F1;
    return Controller{StateSpace(AK, BK, CK, DK), true};
}

double optimal_cost(const Plant& plant, const Matrix& X) {
    const int r1 = relative_degree(plant.A, plant.B1, plant.C2);
    const Matrix X11 = X.topLeftCorner(plant.n(), plant.n());
    const Vector w = matrix_power(plant.A, r1 - 1) * plant.B1;
    double value = w.dot(X11 * w);
    Vector v = plant.B1;
    for (int j = 0; j <= r1 - 2; ++j) {
        value += (plant.C1 * v).squaredNorm();
        v = plant.A * v;
    }
    return value;
}

ErasureClosedForm erasure_closed_forms(const std::vector<Complex>& eigenvalues, double e) {
    if (e < 0.0 || e >= 1.0) {
        throw std::invalid_argument("erasure_closed_forms: e must lie in [0,1)");
    }
    double M = 1.0;
    for (const Complex& lam : eigenvalues) {
        const double a = std::abs(lam);
        if (a > 1.0) {
            M *= a;
        }
    }
    ErasureClosedForm out;
    out.threshold = 1.0 / (M * M);
    out.stabilizable = e < out.threshold;
    if (out.stabilizable) {
        out.min_power = (M * M - 1.0) / (1.0 - e * M * M);
    }
    return out;
}

Matrix explicit_observer_y(const AugmentedPlant& ap, const AnalysisWeights& w) {
    const Index m = ap.order();
    const double c1 = w.sigma0 * w.sigma0 * w.lambda0 * w.lambda0;
    const double c2 = (w.lambda1 / w.gamma) * (w.lambda1 / w.gamma);
    Matrix Y = Matrix::Zero(m, m);
    Vector v = ap.Bbar1;
    for (int i = 0; i <= ap.r1 - 1; ++i) {
        Y += c1 * (v * v.transpose());
        v = ap.Abar * v;
    }
    v = ap.Bbar2;
    for (int i = 0; i <= ap.r2 - 1; ++i) {
        Y += c2 * (v * v.transpose());
        v = ap.Abar * v;
    }
    return Y;
}

double observer_y_residual(const AugmentedPlant& ap, const AnalysisWeights& w, const Matrix& Y) {
    const double c1 = w.sigma0 * w.sigma0 * w.lambda0 * w.lambda0;
    const double c2 = (w.lambda1 / w.gamma) * (w.lambda1 / w.gamma);
    const Matrix CYC = ap.Cbar2 * Y * ap.Cbar2.transpose();
    const Matrix rhs = ap.Abar * Y * ap.Abar.transpose() +
                       c1 * (ap.Bbar1 * ap.Bbar1.transpose()) +
                       c2 * (ap.Bbar2 * ap.Bbar2.transpose()) -
                       ap.Abar * Y * ap.Cbar2.transpose() * pseudo_inverse(CYC, kRankTol) *
                           ap.Cbar2 * Y * ap.Abar.transpose();
    return (Y - rhs).norm() / (1.0 + Y.norm());
}

SynthesisResult synthesize(const Plant& plant, const NoiseModel& noise, FeedbackKind feedback) {
    const SpectralModel sm = spectral_model_from_noise(noise);
    const AugmentedPlant ap = build_augmented_plant(plant, sm);
    const MareSolution mare = solve_mare(ap);

    SynthesisResult result;
    result.X = mare.X;
    result.iterations = mare.iterations;
    result.residual = mare.residual;
    result.ms_margin = mare.ms_margin;
    result.stabilizable = mare.stabilizing;
    result.message = mare.message;
    if (!mare.stabilizing) {
        return result;
    }

    result.F = mare.F;
    result.J_opt = optimal_cost(plant, mare.X);
    if (feedback == FeedbackKind::Output) {
        auto [L, L0] = observer_gains(ap, mare.F);
        result.L = L;
        result.L0 = L0;
        result.K = assemble_controller(ap, mare.F, L, L0);
    } else {
        result.K = assemble_state_feedback_controller(ap, mare.F);
    }
    return result;
}

}  // namespace msh2

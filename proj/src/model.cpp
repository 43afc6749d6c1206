#include "msh2/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace msh2 {

namespace {

using ComplexMatrix = Eigen::MatrixXcd;

double smallest_singular_ratio(const ComplexMatrix& M) {
    Eigen::JacobiSVD<ComplexMatrix> svd(M);
    const Vector& sv = svd.singularValues();
    const Index k = std::min(M.rows(), M.cols());
    if (sv(0) <= 0.0) {
        return 0.0;
    }
    return sv(k - 1) / sv(0);
}

// PBH-style test: sigma_min([lambda I - A, B]) over the given eigenvalues,
// normalized by the largest singular value. Vacuously 1 when `points` is empty.
Check pbh_columns(const Matrix& A, const Matrix& B, const std::vector<Complex>& points) {
    Check c{true, 1.0};
    const Index n = A.rows();
    for (const Complex& lam : points) {
        ComplexMatrix M(n, n + B.cols());
        M.leftCols(n) = lam * ComplexMatrix::Identity(n, n) - A.cast<Complex>();
        M.rightCols(B.cols()) = B.cast<Complex>();
        const double ratio = smallest_singular_ratio(M);
        c.margin = std::min(c.margin, ratio);
        if (ratio <= kRankTol) {
            c.ok = false;
        }
    }
    return c;
}

Check pbh_rows(const Matrix& A, const Matrix& C, const std::vector<Complex>& points) {
    Check c{true, 1.0};
    const Index n = A.rows();
    for (const Complex& lam : points) {
        ComplexMatrix M(n + C.rows(), n);
        M.topRows(n) = lam * ComplexMatrix::Identity(n, n) - A.cast<Complex>();
        M.bottomRows(C.rows()) = C.cast<Complex>();
        const double ratio = smallest_singular_ratio(M);
        c.margin = std::min(c.margin, ratio);
        if (ratio <= kRankTol) {
            c.ok = false;
        }
    }
    return c;
}

Complex eval_poly_zinv(const Vector& coeffs, const Complex& z) {
    // coeffs are powers of z^{-1}
    Complex acc(0.0, 0.0);
    const Complex zi = 1.0 / z;
    Complex zp(1.0, 0.0);
    for (Index i = 0; i < coeffs.size(); ++i) {
        acc += coeffs(i) * zp;
        zp *= zi;
    }
    return acc;
}

Index pencil_rank(const Matrix& A, const Matrix& B, const Matrix& C, const Complex& z) {
    const Index n = A.rows();
    ComplexMatrix P(n + C.rows(), n + B.cols());
    P.setZero();
    P.topLeftCorner(n, n) = A.cast<Complex>() - z * ComplexMatrix::Identity(n, n);
    P.topRightCorner(n, B.cols()) = B.cast<Complex>();
    P.bottomLeftCorner(C.rows(), n) = C.cast<Complex>();
    Eigen::JacobiSVD<ComplexMatrix> svd(P);
    const Vector& sv = svd.singularValues();
    const double cutoff = kRankTol * std::max(sv(0), 1e-300);
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff) {
            ++rank;
        }
    }
    return rank;
}

// Generalized eigenvalues of the square system pencil [A - zI, B; C, 0].
// Infinite eigenvalues (beta ~ 0) are dropped; 0/0 pairs flag degeneracy.
std::vector<Complex> square_pencil_zeros(const Matrix& A, const Matrix& B,
                                         const Matrix& C, bool* degenerate) {
    const Index n = A.rows();
    const Index m = B.cols();
    Matrix M = Matrix::Zero(n + m, n + m);
    M.topLeftCorner(n, n) = A;
    M.topRightCorner(n, m) = B;
    M.bottomLeftCorner(C.rows(), n) = C;
    Matrix N = Matrix::Zero(n + m, n + m);
    N.topLeftCorner(n, n) = Matrix::Identity(n, n);

    Eigen::GeneralizedEigenSolver<Matrix> ges;
    ges.compute(M, N, /*computeEigenvectors=*/false);

    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    std::vector<Complex> zeros;
    for (Index i = 0; i < ges.alphas().size(); ++i) {
        const Complex a = ges.alphas()(i);
        const double b = ges.betas()(i);
        if (std::abs(b) > 1e-12 * scale) {
            zeros.push_back(a / b);
        } else if (std::abs(a) <= 1e-12 * scale && degenerate != nullptr) {
            *degenerate = true;
        }
    }
    return zeros;
}

}  // namespace

Plant::Plant(Matrix A_, Vector B1_, Vector B2_, Matrix C1_, Matrix C2_, Vector D_)
    : A(std::move(A_)),
      B1(std::move(B1_)),
      B2(std::move(B2_)),
      C1(std::move(C1_)),
      C2(std::move(C2_)),
      D(std::move(D_)) {
    const Index nn = A.rows();
    if (A.cols() != nn) {
        throw std::invalid_argument("Plant: A must be square");
    }
    if (B1.size() != nn || B2.size() != nn) {
        throw std::invalid_argument("Plant: B1/B2 must have length n");
    }
    if (C1.cols() != nn || C2.cols() != nn) {
        throw std::invalid_argument("Plant: C1/C2 must have n columns");
    }
    if (C1.rows() == 0 || C2.rows() == 0) {
        throw std::invalid_argument("Plant: C1 and C2 must have at least one row");
    }
    if (D.size() != C1.rows()) {
        throw std::invalid_argument("Plant: D must have length p");
    }
}

NoiseModel::NoiseModel(Vector mu_, Matrix beta_) : mu(std::move(mu_)), beta(std::move(beta_)) {
    if (mu.size() < 1) {
        throw std::invalid_argument("NoiseModel: mu must be nonempty");
    }
    if (beta.rows() != mu.size() || beta.cols() != mu.size()) {
        throw std::invalid_argument("NoiseModel: beta must be (horizon+1) square");
    }
    for (Index i = 0; i < beta.rows(); ++i) {
        if (beta(i, i) < -kPsdTol) {
            throw std::invalid_argument("NoiseModel: negative variance on the diagonal");
        }
    }
    require_psd(beta, kPsdTol, "NoiseModel beta");
}

bool AssumptionReport::pass() const {
    return stabilizable_AB2.ok && no_unit_circle_unobservable_AC1.ok && detectable_AC2.ok &&
           no_unit_circle_unstabilizable.ok && H_nonzero_at_unstable_poles.ok &&
           Gy_minimum_phase.ok && C2Psi_full_column_rank.ok;
}

bool AssumptionReport::pass_state_feedback() const {
    return stabilizable_AB2.ok && no_unit_circle_unobservable_AC1.ok &&
           H_nonzero_at_unstable_poles.ok;
}

NoiseModel delay_channel_noise(const Vector& alpha, const Vector& probs) {
    if (alpha.size() != probs.size() || alpha.size() == 0) {
        throw std::invalid_argument("delay_channel_noise: alpha and probs must have equal length");
    }
    for (Index i = 0; i < probs.size(); ++i) {
        if (probs(i) < -1e-15 || probs(i) > 1.0 + 1e-15) {
            std::ostringstream os;
            os << "delay_channel_noise: probability out of [0,1] at index " << i << " (value "
               << probs(i) << ")";
            throw std::invalid_argument(os.str());
        }
    }
    if (std::abs(probs.sum() - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "delay_channel_noise: probabilities sum to " << probs.sum() << ", expected 1";
        throw std::invalid_argument(os.str());
    }

    const Index m = alpha.size();
    Vector mu(m);
    for (Index i = 0; i < m; ++i) {
        mu(i) = alpha(i) * probs(i);
    }
    Matrix beta(m, m);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) {
            double v = -alpha(i) * alpha(j) * probs(i) * probs(j);
            if (i == j) {
                v += alpha(i) * alpha(i) * probs(i);
            }
            beta(i, j) = v;
        }
    }
    beta = ((beta + beta.transpose()) / 2.0).eval();
    return NoiseModel(std::move(mu), std::move(beta));
}

NoiseModel erasure_channel_noise(double e) {
    if (e < 0.0 || e > 1.0) {
        throw std::invalid_argument("erasure_channel_noise: e must lie in [0,1]");
    }
    Vector mu(1);
    mu(0) = 1.0 - e;
    Matrix beta(1, 1);
    beta(0, 0) = e * (1.0 - e);
    return NoiseModel(std::move(mu), std::move(beta));
}

int relative_degree(const Matrix& A, const Vector& B, const Matrix& C) {
    if (A.rows() != A.cols() || B.size() != A.rows() || C.cols() != A.cols()) {
        throw std::invalid_argument("relative_degree: inconsistent dimensions");
    }
    const Index n = A.rows();
    const double normC = std::max(C.norm(), 1e-300);
    const double normB = std::max(B.norm(), 1e-300);
    const double normA = std::max(1.0, A.norm());

    Vector v = B;
    double apow = 1.0;
    for (Index j = 0; j < n; ++j) {
        const double markov = (C * v).norm();
        if (markov > kRankTol * normC * normB * apow) {
            return static_cast<int>(j) + 1;
        }
        v = A * v;
        apow *= normA;
    }
    throw std::domain_error("relative_degree: identically zero channel (no r <= n)");
}

std::vector<Complex> transmission_zeros(const Matrix& A, const Matrix& B, const Matrix& C,
                                        bool* degenerate) {
    const Index n = A.rows();
    const Index m = B.cols();
    const Index q = C.rows();
    if (degenerate != nullptr) {
        *degenerate = false;
    }

    // Normal rank probe at a few generic points; a drop below n + min(q,m)
    // means the transfer matrix is not full normal rank (no left inverse).
    Index normal_rank = 0;
    const Complex probes[] = {Complex(0.731, 0.219), Complex(-1.387, 0.544), Complex(2.113, -0.917)};
    for (const Complex& z : probes) {
        normal_rank = std::max(normal_rank, pencil_rank(A, B, C, z));
    }
    if (normal_rank < n + std::min(q, m)) {
        if (degenerate != nullptr) {
            *degenerate = true;
        }
        return {};
    }

    std::vector<Complex> candidates;
    bool sq_degenerate = false;
    if (q == m) {
        candidates = square_pencil_zeros(A, B, C, &sq_degenerate);
    } else if (q > m) {
        // Tall system: gather candidates from square row subselections and keep
        // those where the full pencil actually drops rank.
        std::vector<Index> rows(q);
        for (Index i = 0; i < q; ++i) rows[i] = i;
        std::vector<std::vector<Index>> combos;
        if (m == 1) {
            for (Index i = 0; i < q; ++i) combos.push_back({i});
        } else {
            for (Index i = 0; i < q; ++i)
                for (Index j = i + 1; j < q; ++j) combos.push_back({i, j});
        }
        for (const auto& sel : combos) {
            Matrix Cs(static_cast<Index>(sel.size()), A.cols());
            for (size_t k = 0; k < sel.size(); ++k) Cs.row(static_cast<Index>(k)) = C.row(sel[k]);
            bool sub_degenerate = false;
            for (const Complex& z : square_pencil_zeros(A, B, Cs, &sub_degenerate)) {
                candidates.push_back(z);
            }
        }
    } else {
        // Wide system: candidates from per-column SISO subselections.
        for (Index j = 0; j < m; ++j) {
            for (Index i = 0; i < q; ++i) {
                Matrix Bs = B.col(j);
                Matrix Cs = C.row(i);
                bool sub_degenerate = false;
                for (const Complex& z : square_pencil_zeros(A, Bs, Cs, &sub_degenerate)) {
                    candidates.push_back(z);
                }
            }
        }
    }
    if (sq_degenerate) {
        if (degenerate != nullptr) {
            *degenerate = true;
        }
        return {};
    }
    if (q == m) {
        return candidates;
    }

    std::vector<Complex> zeros;
    for (const Complex& z : candidates) {
        if (pencil_rank(A, B, C, z) < normal_rank) {
            bool dup = false;
            for (const Complex& zz : zeros) {
                if (std::abs(zz - z) < 1e-8 * std::max(1.0, std::abs(z))) {
                    dup = true;
                    break;
                }
            }
            if (!dup) {
                zeros.push_back(z);
            }
        }
    }
    return zeros;
}

AssumptionReport validate_assumptions(const Plant& plant, const Vector& H) {
    AssumptionReport rep;

    const ComplexVector eigs = eigenvalues(plant.A);
    std::vector<Complex> outside;
    std::vector<Complex> on_circle;
    std::vector<Complex> not_inside;  // outside or on the circle
    for (Index i = 0; i < eigs.size(); ++i) {
        const double a = std::abs(eigs(i));
        if (a > 1.0 + kCircleTol) {
            outside.push_back(eigs(i));
            not_inside.push_back(eigs(i));
        } else if (a >= 1.0 - kCircleTol) {
            on_circle.push_back(eigs(i));
            not_inside.push_back(eigs(i));
        }
    }
    rep.unstable_poles = outside;

    Matrix B2m = plant.B2;
    rep.stabilizable_AB2 = pbh_columns(plant.A, B2m, not_inside);
    rep.no_unit_circle_unobservable_AC1 = pbh_rows(plant.A, plant.C1, on_circle);
    rep.detectable_AC2 = pbh_rows(plant.A, plant.C2, not_inside);

    Matrix B12(plant.n(), 2);
    B12.col(0) = plant.B1;
    B12.col(1) = plant.B2;
    rep.no_unit_circle_unstabilizable = pbh_columns(plant.A, B12, on_circle);

    // H(z) must not vanish at any unstable plant pole.
    rep.H_nonzero_at_unstable_poles = Check{true, 1.0};
    const double hscale = std::max(H.cwiseAbs().sum(), 1e-300);
    for (const Complex& lam : outside) {
        const double v = std::abs(eval_poly_zinv(H, lam)) / hscale;
        rep.H_nonzero_at_unstable_poles.margin =
            std::min(rep.H_nonzero_at_unstable_poles.margin, v);
        if (v <= kRankTol) {
            rep.H_nonzero_at_unstable_poles.ok = false;
        }
    }

    // Relative degrees of the two measurement channels (0 = undefined).
    try {
        rep.r1 = relative_degree(plant.A, plant.B1, plant.C2);
    } catch (const std::domain_error&) {
        rep.r1 = 0;
        rep.notes += "w -> y channel is identically zero; ";
    }
    try {
        rep.r2 = relative_degree(plant.A, plant.B2, plant.C2);
    } catch (const std::domain_error&) {
        rep.r2 = 0;
        rep.notes += "u_d -> y channel is identically zero; ";
    }

    // Minimum phase of G_y: no finite transmission zero outside the unit circle.
    bool degenerate = false;
    const std::vector<Complex> zeros = transmission_zeros(plant.A, B12, plant.C2, &degenerate);
    if (degenerate) {
        rep.Gy_minimum_phase = Check{false, -1.0};
        rep.notes += "Gy pencil is rank-deficient for all z (not left invertible); ";
    } else {
        rep.Gy_minimum_phase = Check{true, 1.0};
        for (const Complex& z : zeros) {
            const double margin = 1.0 - std::abs(z);
            rep.Gy_minimum_phase.margin = std::min(rep.Gy_minimum_phase.margin, margin);
            if (std::abs(z) > 1.0 + kCircleTol) {
                rep.Gy_minimum_phase.ok = false;
            } else if (std::abs(std::abs(z) - 1.0) <= kCircleTol) {
                rep.notes += "Gy zero on the unit circle at " + format_complex(z) + "; ";
            }
        }
    }

    // Full column rank of C2 Psi with Psi = [A^{r1-1} B1, A^{r2-1} B2].
    if (rep.r1 >= 1 && rep.r2 >= 1) {
        Matrix Psi(plant.n(), 2);
        Psi.col(0) = matrix_power(plant.A, rep.r1 - 1) * plant.B1;
        Psi.col(1) = matrix_power(plant.A, rep.r2 - 1) * plant.B2;
        Matrix C2Psi = plant.C2 * Psi;
        Eigen::JacobiSVD<Matrix> svd(C2Psi);
        const Vector& sv = svd.singularValues();
        const double ratio = sv(0) > 0.0 ? sv(sv.size() - 1) / sv(0) : 0.0;
        rep.C2Psi_full_column_rank = Check{ratio > kRankTol, ratio};
    } else {
        rep.C2Psi_full_column_rank = Check{false, 0.0};
    }

    return rep;
}

}  // namespace msh2

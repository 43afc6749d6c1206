#include "msh2/analysis.hpp"

#include "msh2/detail/sym.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace msh2 {

namespace {

StateSpace subsystem(const StateSpace& G, Index row_begin, Index row_count, Index col) {
    return StateSpace(G.A, G.B.col(col), G.C.middleRows(row_begin, row_count),
                      G.D.block(row_begin, col, row_count, 1));
}

double rho_2x2(const Matrix& M) {
    const double tr = M(0, 0) + M(1, 1);
    const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    const Complex disc = std::sqrt(Complex(tr * tr - 4.0 * det, 0.0));
    return std::max(std::abs((tr + disc) / 2.0), std::abs((tr - disc) / 2.0));
}

}  // namespace

StateSpace NominalClosedLoop::G_zw() const { return subsystem(G, 0, p, 0); }
StateSpace NominalClosedLoop::G_zd() const { return subsystem(G, 0, p, 1); }
StateSpace NominalClosedLoop::G_uw() const { return subsystem(G, p, 1, 0); }
StateSpace NominalClosedLoop::G_ud() const { return subsystem(G, p, 1, 1); }

NominalClosedLoop close_nominal(const Plant& plant, const SpectralModel& noise,
                                const Controller& controller) {
    const Index n = plant.n();
    const Index p = plant.p();
    const int tau = noise.horizon();
    const StateSpace& K = controller.K;
    const Matrix C2eff =
        controller.reads_state ? Matrix(Matrix::Identity(n, n)) : Matrix(plant.C2);
    if (K.inputs() != C2eff.rows()) {
        throw std::invalid_argument("close_nominal: controller input dimension mismatch");
    }
    if (K.outputs() != 1) {
        throw std::invalid_argument("close_nominal: controller must have a scalar output");
    }
    const Index nk = K.order();
    const Index m = n + tau + nk;

    // State [x; x_H; x_K] with u = C_K x_K + D_K y, u_d = Chat x_H + Dhat1 u + d.
    const RowVector DKC = (K.D * C2eff).row(0);
    Matrix A = Matrix::Zero(m, m);
    A.topLeftCorner(n, n) = plant.A + plant.B2 * noise.Dhat1 * DKC;
    if (tau > 0) {
        A.block(0, n, n, tau) = plant.B2 * noise.Chat;
        A.block(n, 0, tau, n) = noise.Bhat1 * DKC;
        A.block(n, n, tau, tau) = noise.Ahat;
        A.block(n, n + tau, tau, nk) = noise.Bhat1 * K.C;
    }
    A.block(0, n + tau, n, nk) = plant.B2 * noise.Dhat1 * K.C;
    A.block(n + tau, 0, nk, n) = K.B * C2eff;
    A.bottomRightCorner(nk, nk) = K.A;

    Matrix B = Matrix::Zero(m, 2);
    B.col(0).head(n) = plant.B1;
    B.col(1).head(n) = plant.B2;

    Matrix C = Matrix::Zero(p + 1, m);
    C.topLeftCorner(p, n) = plant.C1 + plant.D * noise.Dhat1 * DKC;
    if (tau > 0) {
        C.block(0, n, p, tau) = plant.D * noise.Chat;
    }
    C.block(0, n + tau, p, nk) = plant.D * noise.Dhat1 * K.C;
    C.block(p, 0, 1, n) = DKC;
    C.block(p, n + tau, 1, nk) = K.C;

    Matrix D = Matrix::Zero(p + 1, 2);
    D.block(0, 1, p, 1) = plant.D;

    const ComplexVector eigs = eigenvalues(A);
    std::vector<Complex> unstable;
    for (Index i = 0; i < eigs.size(); ++i) {
        if (std::abs(eigs(i)) >= 1.0) {
            unstable.push_back(eigs(i));
        }
    }
    if (!unstable.empty()) {
        std::ostringstream os;
        os << "close_nominal: controller does not internally stabilize the nominal loop;"
           << " unstable eigenvalues:";
        for (const Complex& z : unstable) {
            os << " " << format_complex(z);
        }
        throw std::domain_error(os.str());
    }

    return NominalClosedLoop{StateSpace(A, B, C, D), p};
}

StabilityReport ms_stability(const NominalClosedLoop& loop, const SpectralModel& noise,
                             double sigma0) {
    StabilityReport rep;
    const StateSpace phi = noise.factor_system();

    rep.norm_zw_sq = h2_norm_sq(loop.G_zw());
    rep.norm_uw_sq = h2_norm_sq(loop.G_uw());
    rep.norm_zd_phi_sq = h2_norm_sq(series(phi, loop.G_zd()));
    rep.norm_ud_phi_sq = h2_norm_sq(series(phi, loop.G_ud()));

    rep.g_hat(0, 0) = sigma0 * sigma0 * rep.norm_zw_sq;
    rep.g_hat(0, 1) = rep.norm_zd_phi_sq;
    rep.g_hat(1, 0) = sigma0 * sigma0 * rep.norm_uw_sq;
    rep.g_hat(1, 1) = rep.norm_ud_phi_sq;
    rep.rho = rho_2x2(rep.g_hat);

    rep.margin = 1.0 - rep.norm_ud_phi_sq;
    rep.ms_stable = rep.margin > 0.0;
    rep.marginal = std::abs(rep.margin) < 1e-8 || std::abs(1.0 - rep.rho) < 1e-8;
    if (rep.ms_stable) {
        rep.J_H2 = rep.norm_zw_sq + rep.norm_uw_sq * rep.norm_zd_phi_sq / rep.margin;
    }
    return rep;
}

std::optional<double> scaling_certificate(const Matrix& g_hat, double sigma0) {
    if (g_hat.rows() != 2 || g_hat.cols() != 2 || g_hat.minCoeff() < 0.0) {
        throw std::invalid_argument("scaling_certificate: g_hat must be entrywise nonnegative 2x2");
    }
    const double a = sigma0 * sigma0 * g_hat(0, 0);
    const double b = g_hat(0, 1);
    const double c = sigma0 * sigma0 * g_hat(1, 0);
    const double d = g_hat(1, 1);
    Matrix G(2, 2);
    G << a, b, c, d;
    if (a >= 1.0 || d >= 1.0 || rho_2x2(G) >= 1.0) {
        return std::nullopt;
    }

    const auto satisfies = [&](double g2) {
        return g2 > 0.0 && (a + g2 * c) < 1.0 && (b / g2 + d) < 1.0;
    };

    // Perron weights make both weighted column sums equal to rho < 1; the
    // closed-form interval covers matrices with zero entries.
    if (b > 0.0 && c > 0.0) {
        const double rho = rho_2x2(G);
        const double g2 = (rho - a) / c;  // left eigenvector (1, g2) of G
        if (satisfies(g2)) {
            return g2;
        }
    }
    const double lower = b / (1.0 - d);
    const double upper = (c > 0.0) ? (1.0 - a) / c : std::numeric_limits<double>::infinity();
    double g2 = 0.0;
    if (std::isinf(upper)) {
        g2 = std::max(1.0, 2.0 * lower);
    } else if (lower == 0.0) {
        g2 = upper / 2.0;
    } else {
        g2 = std::sqrt(lower * upper);
    }
    if (satisfies(g2)) {
        return g2;
    }
    return std::nullopt;
}

MomentOracleResult moment_oracle(const Plant& plant, const NoiseModel& noise,
                                 const Controller& controller) {
    const Index n = plant.n();
    const int tau = noise.horizon();
    const StateSpace& K = controller.K;
    const Index nk = K.order();
    if (tau > 3 || n + nk > 12) {
        throw std::invalid_argument("moment_oracle: dimension cap exceeded (tau <= 3, n + n_K <= 12)");
    }
    const Matrix C2eff =
        controller.reads_state ? Matrix(Matrix::Identity(n, n)) : Matrix(plant.C2);
    if (K.inputs() != C2eff.rows() || K.outputs() != 1) {
        throw std::invalid_argument("moment_oracle: controller dimension mismatch");
    }

    // Lifted state layout: [x; x_K; u(k-1..k-tau); eta_1; ...; eta_tau] where
    // eta_j stacks the not-yet-applied products of packet v_{k-j} with u(k-j).
    const Index base_u = n + nk;
    const Index base_eta = base_u + tau;
    std::vector<Index> eta_offset(static_cast<size_t>(tau) + 1, 0);
    Index m = base_eta;
    for (int j = 1; j <= tau; ++j) {
        eta_offset[static_cast<size_t>(j)] = m;
        m += tau + 1 - j;
    }

    RowVector K_row = RowVector::Zero(m);
    K_row.head(n) = (K.D * C2eff).row(0);
    K_row.segment(n, nk) = K.C.row(0);

    // u_d(k) = L_ud xi(k) + pi_k[0]
    RowVector L_ud = noise.mu(0) * K_row;
    for (int i = 1; i <= tau; ++i) {
        L_ud(base_u + i - 1) += noise.mu(i);
    }
    for (int j = 1; j <= tau; ++j) {
        L_ud(eta_offset[static_cast<size_t>(j)]) += 1.0;
    }

    Matrix A_L = Matrix::Zero(m, m);
    A_L.topLeftCorner(n, n) = plant.A;
    A_L.topRows(n) += plant.B2 * L_ud;
    A_L.block(n, 0, nk, n) = K.B * C2eff;
    A_L.block(n, n, nk, nk) = K.A;
    if (tau > 0) {
        A_L.row(base_u) = K_row;
        for (int i = 2; i <= tau; ++i) {
            A_L(base_u + i - 1, base_u + i - 2) = 1.0;
        }
    }
    for (int j = 2; j <= tau; ++j) {
        for (int mm = 0; mm <= tau - j; ++mm) {
            A_L(eta_offset[static_cast<size_t>(j)] + mm,
                eta_offset[static_cast<size_t>(j - 1)] + mm + 1) = 1.0;
        }
    }

    Vector B_w = Vector::Zero(m);
    B_w.head(n) = plant.B1;

    Matrix E_pi = Matrix::Zero(m, tau + 1);
    E_pi.col(0).head(n) = plant.B2;
    for (int i = 1; i <= tau; ++i) {
        E_pi(eta_offset[1] + i - 1, i) = 1.0;
    }
    const Matrix Gmat = E_pi * noise.beta * E_pi.transpose();

    const Matrix T = detail::sym_op_matrix(m, [&](const Matrix& E) {
        return Matrix(A_L * E * A_L.transpose() + (K_row * E * K_row.transpose())(0) * Gmat);
    });

    MomentOracleResult out;
    out.rho_moment = spectral_radius(T);
    if (out.rho_moment >= 1.0) {
        return out;
    }

    const Index sd = detail::sym_dim(m);
    const Vector rhs = detail::sym_vec(Matrix(B_w * B_w.transpose()));
    const Vector x = (Matrix::Identity(sd, sd) - T).partialPivLu().solve(rhs);
    const Matrix Sigma = detail::sym_unvec(x, m);

    out.power_u = (K_row * Sigma * K_row.transpose())(0);
    Matrix C_z = Matrix::Zero(plant.p(), m);
    C_z.leftCols(n) = plant.C1;
    C_z += plant.D * L_ud;
    out.power_z = (C_z * Sigma * C_z.transpose()).trace() +
                  plant.D.squaredNorm() * noise.beta(0, 0) * out.power_u;
    return out;
}

}  // namespace msh2

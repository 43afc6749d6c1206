#include "msh2/riccati.hpp"

#include "msh2/detail/sym.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <sstream>

namespace msh2 {

namespace {

Matrix symmetrized(const Matrix& X) { return ((X + X.transpose()) / 2.0).eval(); }

// Generalized Riccati data. The inner weight is M(X) = R0 + c + W'XW; a plain
// DARE has W = 0, c = 0.
struct RiccatiData {
    Matrix A;
    Vector B;
    Matrix Q;
    Vector S;
    double R0 = 0.0;
    Vector W;
    double c = 0.0;
};

double inner_weight(const RiccatiData& d, const Matrix& X) {
    double m = d.R0 + d.c + d.B.dot(X * d.B);
    if (d.W.size() > 0) {
        m += d.W.dot(X * d.W);
    }
    return m;
}

// Guards the (M(X) + B'XB)^{-1} factor. A vanishing inner weight is only
// admissible when the coupling term vanishes with it (cost-free problem); the
// correction then tends to zero.
bool inner_is_degenerate(const RiccatiData& d, const Matrix& X, double inner, const Vector& g) {
    const double gscale = 1.0 + d.S.norm() + d.A.norm() * d.B.norm() * X.norm();
    if (inner > 1e-14 * gscale) {
        return false;
    }
    if (g.norm() > 1e-10 * gscale) {
        throw std::runtime_error("riccati: inner matrix M(X) + B'XB is not positive definite");
    }
    return true;
}

Matrix riccati_rhs(const RiccatiData& d, const Matrix& X, const Matrix& Qeff) {
    const double inner = inner_weight(d, X);
    const Vector g = d.A.transpose() * (X * d.B) + d.S;
    if (inner_is_degenerate(d, X, inner, g)) {
        return symmetrized(d.A.transpose() * X * d.A + Qeff);
    }
    return symmetrized(d.A.transpose() * X * d.A + Qeff - (g * g.transpose()) / inner);
}

RowVector riccati_gain(const RiccatiData& d, const Matrix& X) {
    const double inner = inner_weight(d, X);
    const Vector g = d.A.transpose() * (X * d.B) + d.S;
    if (inner_is_degenerate(d, X, inner, g)) {
        return RowVector::Zero(d.A.rows());
    }
    return (-g.transpose() / inner).eval();
}

using detail::sym_dim;
using detail::sym_op_matrix;
using detail::sym_unvec;
using detail::sym_vec;

// Matrix of X |-> AF' X AF + (W'XW) F'F on the basis of symmetric matrices.
Matrix policy_map_matrix(const Matrix& AF, const Vector& W, const RowVector& F) {
    const Matrix FtF = F.transpose() * F;
    return sym_op_matrix(AF.rows(), [&](const Matrix& E) {
        Matrix Y = AF.transpose() * E * AF;
        if (W.size() > 0) {
            Y += (W.dot(E * W)) * FtF;
        }
        return Y;
    });
}

// Exact value of policy F: the fixed point of
//   X = AF' X AF + (W'XW) F'F + G_F,
//   G_F = Q + S F + F'S' + F'(R0 + c)F.
// Returns nullopt when F is not mean-square stabilizing (rho of the policy
// map >= 1).
std::optional<Matrix> policy_value(const RiccatiData& d, const RowVector& F,
                                   const Matrix& Qeff) {
    const Index m = d.A.rows();
    const Matrix AF = d.A + d.B * F;
    const Matrix T = policy_map_matrix(AF, d.W, F);
    if (spectral_radius(T) >= 1.0 - 1e-12) {
        return std::nullopt;
    }
    const Matrix G =
        symmetrized(Qeff + d.S * F + (d.S * F).transpose() + F.transpose() * (d.R0 + d.c) * F);
    const Index sd = sym_dim(m);
    const Matrix lhs = Matrix::Identity(sd, sd) - T;
    const Vector x = lhs.partialPivLu().solve(sym_vec(G));
    return symmetrized(sym_unvec(x, m));
}

// Newton-style refinement from a mean-square stabilizing policy; value
// iterates of the policies decrease monotonically to the stabilizing
// solution.
std::optional<Matrix> policy_iteration(const RiccatiData& d, RowVector F, const Matrix& Qeff,
                                       int* iterations) {
    std::optional<Matrix> X = policy_value(d, F, Qeff);
    if (!X) {
        return std::nullopt;
    }
    for (int j = 0; j < 100; ++j) {
        const RowVector Fn = riccati_gain(d, *X);
        const std::optional<Matrix> Xn = policy_value(d, Fn, Qeff);
        if (iterations != nullptr) {
            ++*iterations;
        }
        if (!Xn) {
            break;
        }
        const bool converged = ((*Xn - *X).norm() <= 1e-13 * (1.0 + Xn->norm()));
        X = Xn;
        F = Fn;
        if (converged) {
            break;
        }
    }
    return X;
}

struct EngineOutcome {
    bool solved = false;
    Matrix X;
    RowVector F;
    int iterations = 0;
    std::string message;
};

RiccatiData scaled_data(const RiccatiData& d, double s) {
    RiccatiData ds = d;
    if (d.W.size() > 0) {
        ds.W = std::sqrt(s) * d.W;
    }
    ds.c = s * d.c;
    return ds;
}

// Homotopy in the noise scale s: start from the deterministic problem (s = 0)
// and carry a stabilizing policy to s = 1 with adaptive steps. Each step is an
// exact policy-iteration solve, so a vanishing stability margin only shrinks
// the step, never the accuracy.
EngineOutcome homotopy_rescue(const RiccatiData& d, const Matrix& Qeff, int budget) {
    EngineOutcome out;
    out.X = Matrix::Zero(d.A.rows(), d.A.cols());

    RiccatiData d0 = scaled_data(d, 0.0);
    Matrix X = Matrix::Zero(d.A.rows(), d.A.cols());
    std::optional<RowVector> F;
    const int det_cap = std::min(5000, std::max(500, budget));
    for (int it = 0; it < det_cap; ++it) {
        const Matrix Xn = riccati_rhs(d0, X, Qeff);
        ++out.iterations;
        if (!Xn.allFinite() || Xn.norm() > 1e14) {
            out.message = "deterministic stage diverged";
            return out;
        }
        const bool converged = ((Xn - X).norm() <= 1e-12 * (1.0 + Xn.norm()));
        X = Xn;
        if (converged || (it % 25 == 24)) {
            const RowVector Fc = riccati_gain(d0, X);
            if (policy_value(d0, Fc, Qeff)) {
                F = Fc;
                break;
            }
            if (converged) {
                out.message = "deterministic stage converged without a stabilizing gain";
                return out;
            }
        }
    }
    if (!F) {
        out.message = "no stabilizing gain for the deterministic stage";
        return out;
    }

    double s = 0.0;
    double step = 0.1;
    while (s < 1.0) {
        const double s_next = std::min(1.0, s + step);
        const RiccatiData ds = scaled_data(d, s_next);
        if (policy_value(ds, *F, Qeff)) {
            const std::optional<Matrix> Xs = policy_iteration(ds, *F, Qeff, &out.iterations);
            if (!Xs) {
                out.message = "policy iteration lost stability during the continuation";
                return out;
            }
            F = riccati_gain(ds, *Xs);
            X = *Xs;
            s = s_next;
            step = std::min(0.25, 2.0 * step);
        } else {
            step /= 2.0;
            if (step < 1e-9) {
                std::ostringstream os;
                os << "noise-scale continuation stalled at s = " << s;
                out.message = os.str();
                return out;
            }
        }
    }

    out.solved = true;
    out.X = X;
    out.F = *F;
    return out;
}

// Largest-solution engine: monotone value iteration from 0 (with a tiny
// selection shift so that cost-free directions do not pin the iteration at a
// lower fixed point), switching to policy iteration on the exact equation as
// soon as a mean-square stabilizing gain appears.
EngineOutcome riccati_engine(const RiccatiData& d, int max_iter, double tol,
                             std::vector<Matrix>* trace) {
    EngineOutcome out;
    const Index m = d.A.rows();
    const double qscale = 1.0 + d.Q.norm();
    // The shift must dominate the convergence tolerance, otherwise the
    // iteration can settle on a lower (non-largest) fixed point of a
    // cost-free direction. The exact equation is restored in the polish.
    const Matrix Qshift = d.Q + 1e-9 * qscale * Matrix::Identity(m, m);
    out.X = Matrix::Zero(m, m);

    Matrix X = Matrix::Zero(m, m);
    std::optional<RowVector> stabilizing_F;
    bool vi_converged = false;
    bool diverged = false;
    const int vi_cap = std::min(max_iter, 2000);

    for (int it = 0; it < vi_cap; ++it) {
        const Matrix Xn = riccati_rhs(d, X, Qshift);
        ++out.iterations;
        if (trace != nullptr) {
            trace->push_back(Xn);
        }
        if (!Xn.allFinite() || Xn.norm() > 1e12 * qscale) {
            diverged = true;
            break;
        }
        const bool converged = ((Xn - X).norm() <= tol * (1.0 + Xn.norm()));
        X = Xn;
        if (converged) {
            vi_converged = true;
            break;
        }
        if (it % 25 == 24) {
            const RowVector Fc = riccati_gain(d, X);
            if (policy_value(d, Fc, d.Q)) {
                stabilizing_F = Fc;
                break;
            }
        }
    }

    if (diverged) {
        out.message = "value iteration diverged (no PSD stabilizing solution)";
        out.X = X;
        return out;
    }
    if (vi_converged && !stabilizing_F) {
        const RowVector Fc = riccati_gain(d, X);
        if (policy_value(d, Fc, d.Q)) {
            stabilizing_F = Fc;
        }
    }

    if (!stabilizing_F) {
        // Ambiguous: either non-stabilizable or the iteration is too slow near
        // the stabilizability boundary. The continuation settles it.
        EngineOutcome rescue = homotopy_rescue(d, Qshift, max_iter - out.iterations);
        rescue.iterations += out.iterations;
        if (!rescue.solved) {
            if (rescue.message.empty()) {
                rescue.message = "value iteration did not produce a stabilizing gain";
            } else if (vi_converged) {
                rescue.message = "largest solution is not mean-square stabilizing (" +
                                 rescue.message + ")";
            }
            rescue.X = X;
            return rescue;
        }
        // Strip the selection shift from the continuation result.
        const std::optional<Matrix> Xs =
            policy_iteration(d, rescue.F, d.Q, &rescue.iterations);
        if (Xs) {
            rescue.X = *Xs;
            rescue.F = riccati_gain(d, *Xs);
        }
        return rescue;
    }

    // Polish on the exact equation (no selection shift).
    const std::optional<Matrix> Xs = policy_iteration(d, *stabilizing_F, d.Q, &out.iterations);
    if (!Xs) {
        out.message = "policy iteration failed from a stabilizing gain";
        out.X = X;
        return out;
    }
    out.solved = true;
    out.X = *Xs;
    out.F = riccati_gain(d, *Xs);
    return out;
}

}  // namespace

Matrix solve_dlyap(const Matrix& A, const Matrix& Q) {
    if (A.rows() != A.cols() || Q.rows() != Q.cols() || A.rows() != Q.rows()) {
        throw std::invalid_argument("solve_dlyap: dimension mismatch");
    }
    if (Q.rows() == 0) {
        return Matrix(0, 0);
    }
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() >
        1e-10 * std::max(1.0, Q.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("solve_dlyap: Q must be symmetric");
    }
    const double rho = spectral_radius(A);
    if (rho >= 1.0) {
        std::ostringstream os;
        os << "solve_dlyap: A is not stable (spectral radius " << rho << ")";
        throw std::domain_error(os.str());
    }

    Matrix P = symmetrized(Q);
    Matrix Ak = A;
    for (int it = 0; it < 200; ++it) {
        const Matrix delta = Ak * P * Ak.transpose();
        P += delta;
        if (delta.norm() <= 1e-18 * (1.0 + P.norm())) {
            break;
        }
        Ak = (Ak * Ak).eval();
    }
    P = symmetrized(P);

    const double res = (P - A * P * A.transpose() - Q).norm();
    if (res > 1e-10 * (1.0 + P.norm())) {
        std::ostringstream os;
        os << "solve_dlyap: residual " << res << " exceeds tolerance";
        throw std::runtime_error(os.str());
    }
    return P;
}

double h2_norm_sq(const StateSpace& sys) {
    const double rho = spectral_radius(sys.A);
    if (sys.order() > 0 && rho >= 1.0) {
        std::ostringstream os;
        os << "h2_norm_sq: unstable system (spectral radius " << rho << ")";
        throw std::domain_error(os.str());
    }
    double value = sys.D.squaredNorm();
    if (sys.order() > 0) {
        const Matrix P = solve_dlyap(sys.A, sys.B * sys.B.transpose());
        value += (sys.C * P * sys.C.transpose()).trace();
    }
    return value;
}

DareProblem::DareProblem(Matrix A_, Vector B_, Matrix Q_, Vector S_, double R_)
    : A(std::move(A_)), B(std::move(B_)), Q(std::move(Q_)), S(std::move(S_)), R(R_) {
    const Index m = A.rows();
    if (A.cols() != m || B.size() != m || Q.rows() != m || Q.cols() != m || S.size() != m) {
        throw std::invalid_argument("DareProblem: dimension mismatch");
    }
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() >
        1e-10 * std::max(1.0, Q.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("DareProblem: Q must be symmetric");
    }
    if (R < 0.0) {
        throw std::invalid_argument("DareProblem: R must be nonnegative");
    }
}

DareSolution solve_dare(const DareProblem& problem, const DareOptions& opts) {
    RiccatiData d;
    d.A = problem.A;
    d.B = problem.B;
    d.Q = problem.Q;
    d.S = problem.S;
    d.R0 = problem.R;
    d.W = Vector();
    d.c = 0.0;

    const EngineOutcome out = riccati_engine(d, opts.max_iter, opts.tol, opts.trace);
    if (!out.solved) {
        throw std::runtime_error("solve_dare: no stabilizing solution (" + out.message + ")");
    }

    DareSolution sol;
    sol.X = out.X;
    sol.F = out.F;
    sol.iterations = out.iterations;
    sol.residual =
        (out.X - riccati_rhs(d, out.X, d.Q)).norm() / (1.0 + out.X.norm());
    sol.stabilizing = spectral_radius(problem.A + problem.B * out.F) < 1.0;
    if (!sol.stabilizing || sol.residual > 1e-9) {
        std::ostringstream os;
        os << "solve_dare: solution rejected (residual " << sol.residual
           << ", closed-loop radius " << spectral_radius(problem.A + problem.B * out.F) << ")";
        throw std::runtime_error(os.str());
    }
    return sol;
}

MareSolution solve_mare(const AugmentedPlant& ap, const MareOptions& opts) {
    RiccatiData d;
    d.A = ap.Abar;
    d.B = ap.Btilde2;
    d.Q = ap.Cbar1.transpose() * ap.Cbar1;
    d.S = ap.Cbar1.transpose() * ap.Dbar12;
    d.R0 = ap.Dbar12.squaredNorm();
    d.W = phi1_direction(ap);
    d.c = phi1_constant(ap);

    MareSolution sol;
    const EngineOutcome out = riccati_engine(d, opts.max_iter, opts.tol, opts.trace);
    sol.iterations = out.iterations;
    if (!out.solved) {
        sol.X = out.X.size() > 0 ? out.X : Matrix::Zero(ap.order(), ap.order());
        sol.F = RowVector::Zero(ap.order());
        sol.stabilizing = false;
        sol.ms_margin = -std::numeric_limits<double>::infinity();
        sol.message = "not mean-square stabilizable: " + out.message;
        return sol;
    }

    sol.X = out.X;
    sol.F = out.F;
    sol.residual = (out.X - riccati_rhs(d, out.X, d.Q)).norm() / (1.0 + out.X.norm());

    const Matrix AF = ap.Abar + ap.Btilde2 * sol.F;
    const double rho_nom = spectral_radius(AF);
    if (rho_nom < 1.0) {
        // Small-gain margin of the state-feedback loop: the uncertainty path
        // enters through Bd and is shaped by the spectral factor.
        const StateSpace loop(AF, ap.Bd(), Matrix(sol.F), Matrix::Zero(1, 1));
        const StateSpace cascade = series(ap.noise.factor_system(), loop);
        sol.ms_margin = 1.0 - h2_norm_sq(cascade);
    } else {
        sol.ms_margin = -std::numeric_limits<double>::infinity();
    }
    sol.stabilizing = rho_nom < 1.0 && sol.ms_margin > 0.0 && sol.residual <= 1e-9;
    if (!sol.stabilizing) {
        std::ostringstream os;
        os << "not mean-square stabilizable (closed-loop radius " << rho_nom << ", margin "
           << sol.ms_margin << ")";
        sol.message = os.str();
    }
    return sol;
}

}  // namespace msh2

#pragma once

#include "msh2/synthesis.hpp"

#include <vector>

namespace msh2 {

/// Solves P = A P A' + Q for stable A (doubling iteration).
/// Throws std::domain_error when rho(A) >= 1.
Matrix solve_dlyap(const Matrix& A, const Matrix& Q);

/// Squared H2 norm trace(C P C') + trace(D'D) with P the controllability
/// Gramian. Throws std::domain_error for unstable A.
double h2_norm_sq(const StateSpace& sys);

/// X = A'XA + Q - (A'XB + S)(R + B'XB)^{-1}(B'XA + S').
struct DareProblem {
    Matrix A;
    Vector B;
    Matrix Q;
    Vector S;
    double R = 0.0;

    DareProblem(Matrix A_, Vector B_, Matrix Q_, Vector S_, double R_);
};

struct DareSolution {
    Matrix X;
    RowVector F;
    int iterations = 0;
    double residual = 0.0;  // |X - RHS(X)| / (1 + |X|)
    bool stabilizing = false;
};

/// Stabilizing solution via value iteration with a policy-iteration finish.
/// Throws std::runtime_error (with diagnostics) when no stabilizing solution
/// is found.
struct DareOptions {
    int max_iter = 10000;
    double tol = 1e-11;
    std::vector<Matrix>* trace = nullptr;
};
DareSolution solve_dare(const DareProblem& problem, const DareOptions& opts = {});

struct MareSolution {
    Matrix X;
    RowVector F;
    int iterations = 0;
    double residual = 0.0;   // |X - RHS(X)| / (1 + |X|)
    bool stabilizing = false;
    double ms_margin = 0.0;  // 1 - |F (zI - Abar - Btilde2 F)^{-1} Bd Phi|_2^2
    std::string message;
};

struct MareOptions {
    int max_iter = 10000;
    double tol = 1e-11;
    std::vector<Matrix>* trace = nullptr;
};

/// Largest solution of the modified Riccati equation
///   X = Abar'X Abar + Cbar1'Cbar1
///       - (Abar'X Btilde2 + Cbar1'Dbar12) [M(X) + Btilde2'X Btilde2]^{-1} (...)'
/// with M(X) = phi1(X) + Dbar12'Dbar12 recomputed from the iterate.
/// A non-stabilizable problem yields stabilizing = false (no exception);
/// an indefinite inner matrix throws std::runtime_error.
MareSolution solve_mare(const AugmentedPlant& ap, const MareOptions& opts = {});

}  // namespace msh2

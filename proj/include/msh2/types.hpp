#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace msh2 {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;
using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;

// Scale-aware tolerance for all zero/rank decisions.
inline constexpr double kRankTol = 1e-9;
// Half-width of the band around |z| = 1 treated as "on the unit circle".
inline constexpr double kCircleTol = 1e-9;
// Smallest eigenvalue allowed for a nominally PSD matrix.
inline constexpr double kPsdTol = 1e-10;

/// Discrete-time LTI state-space model:
///   x(k+1) = A x(k) + B u(k),  y(k) = C x(k) + D u(k).
struct StateSpace {
    Matrix A, B, C, D;

    StateSpace(Matrix A_, Matrix B_, Matrix C_, Matrix D_);

    Index order() const { return A.rows(); }
    Index inputs() const { return B.cols(); }
    Index outputs() const { return C.rows(); }
};

// Series interconnection y = second(first(u)).
StateSpace series(const StateSpace& first, const StateSpace& second);

ComplexVector eigenvalues(const Matrix& A);
double spectral_radius(const Matrix& A);

// Least-squares generalized inverse; singular values below rel_tol * sigma_max
// are treated as zero.
Matrix pseudo_inverse(const Matrix& M, double rel_tol = kRankTol);

Matrix matrix_power(const Matrix& A, int k);

// Throws std::invalid_argument unless M is symmetric (within tol) with all
// eigenvalues >= -tol * scale.
void require_psd(const Matrix& M, double tol, const std::string& what);

bool approx_equal(const Matrix& a, const Matrix& b, double tol);

std::string format_complex(const Complex& z);

}  // namespace msh2

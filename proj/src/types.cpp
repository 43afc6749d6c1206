#include "msh2/types.hpp"

#include <Eigen/Eigenvalues>

#include <sstream>

namespace msh2 {

StateSpace::StateSpace(Matrix A_, Matrix B_, Matrix C_, Matrix D_)
    : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)), D(std::move(D_)) {
    if (A.rows() != A.cols()) {
        throw std::invalid_argument("StateSpace: A must be square");
    }
    if (B.rows() != A.rows()) {
        throw std::invalid_argument("StateSpace: B row count must match A");
    }
    if (C.cols() != A.cols()) {
        throw std::invalid_argument("StateSpace: C column count must match A");
    }
    if (D.rows() != C.rows() || D.cols() != B.cols()) {
        throw std::invalid_argument("StateSpace: D must be outputs x inputs");
    }
}

StateSpace series(const StateSpace& first, const StateSpace& second) {
    if (second.inputs() != first.outputs()) {
        throw std::invalid_argument("series: output/input dimension mismatch");
    }
    const Index n1 = first.order();
    const Index n2 = second.order();

    Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
    A.topLeftCorner(n1, n1) = first.A;
    A.bottomLeftCorner(n2, n1) = second.B * first.C;
    A.bottomRightCorner(n2, n2) = second.A;

    Matrix B(n1 + n2, first.inputs());
    B.topRows(n1) = first.B;
    B.bottomRows(n2) = second.B * first.D;

    Matrix C(second.outputs(), n1 + n2);
    C.leftCols(n1) = second.D * first.C;
    C.rightCols(n2) = second.C;

    Matrix D = second.D * first.D;
    return StateSpace(A, B, C, D);
}

ComplexVector eigenvalues(const Matrix& A) {
    if (A.rows() == 0) {
        return ComplexVector(0);
    }
    Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
    return es.eigenvalues();
}

double spectral_radius(const Matrix& A) {
    if (A.rows() == 0) {
        return 0.0;
    }
    return eigenvalues(A).cwiseAbs().maxCoeff();
}

Matrix pseudo_inverse(const Matrix& M, double rel_tol) {
    if (M.rows() == 0 || M.cols() == 0) {
        return Matrix::Zero(M.cols(), M.rows());
    }
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double cutoff = rel_tol * (sv.size() > 0 ? sv(0) : 0.0);
    Vector inv = Vector::Zero(sv.size());
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff && sv(i) > 0.0) {
            inv(i) = 1.0 / sv(i);
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix matrix_power(const Matrix& A, int k) {
    if (k < 0) {
        throw std::invalid_argument("matrix_power: negative exponent");
    }
    Matrix P = Matrix::Identity(A.rows(), A.cols());
    for (int i = 0; i < k; ++i) {
        P = P * A;
    }
    return P;
}

void require_psd(const Matrix& M, double tol, const std::string& what) {
    if (M.rows() != M.cols()) {
        throw std::invalid_argument(what + ": not square");
    }
    if (M.rows() == 0) {
        return;
    }
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
        throw std::invalid_argument(what + ": not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol * scale) {
        std::ostringstream os;
        os << what << ": not positive semidefinite (min eigenvalue "
           << es.eigenvalues().minCoeff() << ")";
        throw std::invalid_argument(os.str());
    }
}

bool approx_equal(const Matrix& a, const Matrix& b, double tol) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        return false;
    }
    if (a.size() == 0) {
        return true;
    }
    return (a - b).cwiseAbs().maxCoeff() <= tol;
}

std::string format_complex(const Complex& z) {
    std::ostringstream os;
    os << z.real();
    if (z.imag() >= 0) {
        os << "+" << z.imag() << "i";
    } else {
        os << z.imag() << "i";
    }
    return os.str();
}

}  // namespace msh2

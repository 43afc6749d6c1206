#pragma once

#include "msh2/types.hpp"

#include <functional>

namespace msh2::detail {

// Coordinates on the basis {E_ii = e_i e_i', E_ij = e_i e_j' + e_j e_i'} of
// symmetric matrices; linear maps on that space get a plain matrix so their
// spectra and fixed points are ordinary eigen/solve problems.

inline Index sym_dim(Index m) { return m * (m + 1) / 2; }

inline Vector sym_vec(const Matrix& X) {
    const Index m = X.rows();
    Vector v(sym_dim(m));
    Index k = 0;
    for (Index i = 0; i < m; ++i) {
        for (Index j = i; j < m; ++j) {
            v(k++) = X(i, j);
        }
    }
    return v;
}

inline Matrix sym_unvec(const Vector& v, Index m) {
    Matrix X(m, m);
    Index k = 0;
    for (Index i = 0; i < m; ++i) {
        for (Index j = i; j < m; ++j) {
            X(i, j) = v(k);
            X(j, i) = v(k);
            ++k;
        }
    }
    return X;
}

inline Matrix sym_op_matrix(Index m, const std::function<Matrix(const Matrix&)>& op) {
    const Index sd = sym_dim(m);
    Matrix T(sd, sd);
    Index k = 0;
    for (Index i = 0; i < m; ++i) {
        for (Index j = i; j < m; ++j) {
            Matrix E = Matrix::Zero(m, m);
            E(i, j) = 1.0;
            E(j, i) = 1.0;
            T.col(k++) = sym_vec(op(E));
        }
    }
    return T;
}

}  // namespace msh2::detail

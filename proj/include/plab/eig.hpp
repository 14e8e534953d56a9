#pragma once

#include <vector>

#include "plab/matrix.hpp"

namespace plab {

struct EigResult {
    std::vector<double> eigenvalues; // sorted descending
    Matrix eigenvectors;             // columns match eigenvalues; orthonormal
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
// Converges when the off-diagonal Frobenius norm drops below 1e-12 * ||m||_F
// (hard cap 100 sweeps, error with the residual if exceeded). `sym_tol`
// bounds the accepted elementwise asymmetry |m_ij - m_ji|.
EigResult sym_eig(const Matrix& m, double sym_tol = 1e-9);

// Moore-Penrose pseudoinverse of a symmetric PSD matrix: eigenvalues above
// rank_tol * lambda_max are inverted, the rest are zeroed.
Matrix pseudoinverse(const Matrix& m, double rank_tol = 1e-10);

// Shared default for the relative eigenvalue cutoff.
constexpr double kDefaultRankTol = 1e-10;

} // namespace plab

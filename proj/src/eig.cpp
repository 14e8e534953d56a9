#include "plab/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace plab {

namespace {

// Off-diagonal Frobenius norm.
double off_norm(const Matrix& a) {
    double sum = 0.0;
    const std::size_t n = a.rows();
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = p + 1; q < n; ++q) sum += 2.0 * a(p, q) * a(p, q);
    return std::sqrt(sum);
}

} // namespace

EigResult sym_eig(const Matrix& m, double sym_tol) {
    const std::size_t n = m.rows();
    if (n == 0 || m.cols() != n)
        raise(ErrorCode::Dimension, "sym_eig: matrix is not square (" +
                                        std::to_string(m.rows()) + "x" +
                                        std::to_string(m.cols()) + ")");
    const double asym = max_asymmetry(m);
    const double scale = std::max(1.0, max_abs(m));
    if (asym > sym_tol * scale)
        raise(ErrorCode::Numeric, "sym_eig: matrix is not symmetric (max |m_ij - m_ji| = " +
                                      std::to_string(asym) + ")");

    Matrix a = m;
    // Enforce exact symmetry so the sweep arithmetic stays consistent.
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = p + 1; q < n; ++q) {
            const double v = 0.5 * (a(p, q) + a(q, p));
            a(p, q) = v;
            a(q, p) = v;
        }

    Matrix v = Matrix::identity(n);
    const double norm = frobenius_norm(a);
    const double target = 1e-12 * norm;
    // Rotations on entries this small cannot affect convergence to the target
    // (residual bound: skip_tol * n < target), and skipping them makes sweeps
    // over nearly-diagonalized matrices cheap.
    const double skip_tol = (n > 0) ? target / (2.0 * static_cast<double>(n)) : 0.0;

    constexpr int kMaxSweeps = 100;
    double off = off_norm(a);
    int sweep = 0;
    while (off > target && sweep < kMaxSweeps) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) <= skip_tol) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // Stable rotation angle (Golub & Van Loan).
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0)
                                     ? 1.0 / (theta + std::sqrt(theta * theta + 1.0))
                                     : 1.0 / (theta - std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double apj = a(p, j);
                    const double aqj = a(q, j);
                    a(p, j) = c * apj - s * aqj;
                    a(q, j) = s * apj + c * aqj;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
        off = off_norm(a);
        ++sweep;
    }
    if (off > target)
        raise(ErrorCode::Numeric, "sym_eig: no convergence after " +
                                      std::to_string(kMaxSweeps) +
                                      " sweeps (off-diagonal residual " + std::to_string(off) +
                                      ", target " + std::to_string(target) + ")");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigResult result;
    result.eigenvalues.resize(n);
    result.eigenvectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        result.eigenvalues[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) result.eigenvectors(i, k) = v(i, order[k]);
    }
    return result;
}

Matrix pseudoinverse(const Matrix& m, double rank_tol) {
    const EigResult eig = sym_eig(m);
    const std::size_t n = m.rows();
    const double lambda_max = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
    const double cutoff = rank_tol * std::max(lambda_max, 0.0);

    // V diag(1/lambda_i or 0) V^T, assembled column-scaled to avoid a second product.
    Matrix scaled = eig.eigenvectors;
    for (std::size_t k = 0; k < n; ++k) {
        const double lambda = eig.eigenvalues[k];
        const double inv = (lambda > cutoff && lambda > 0.0) ? 1.0 / lambda : 0.0;
        for (std::size_t i = 0; i < n; ++i) scaled(i, k) *= inv;
    }
    return matmul(scaled, transpose(eig.eigenvectors));
}

} // namespace plab

#include "plab/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace plab {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return Matrix();
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols())
            raise(ErrorCode::Dimension, "from_rows: ragged row " + std::to_string(i));
        std::copy(rows[i].begin(), rows[i].end(), m.row(i));
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void matmul_into(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
    if (a.cols() != b.rows())
        raise(ErrorCode::Dimension,
              "matmul: dimension mismatch (" + shape_str(a) + " * " + shape_str(b) + ")");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (out.rows() != m || out.cols() != n)
        raise(ErrorCode::Dimension, "matmul: output shape is " + shape_str(out) +
                                        ", expected " + std::to_string(m) + "x" +
                                        std::to_string(n));
    if (!accumulate) out.fill(0.0);

    // Row-blocked saxpy ordering: streams B once per row block and keeps the
    // block of C rows hot. Fixed evaluation order, so results are reproducible.
    constexpr std::size_t kBlock = 8;
    for (std::size_t i0 = 0; i0 < m; i0 += kBlock) {
        const std::size_t i1 = std::min(i0 + kBlock, m);
        for (std::size_t l = 0; l < k; ++l) {
            const double* brow = b.row(l);
            for (std::size_t i = i0; i < i1; ++i) {
                const double av = a(i, l);
                if (av == 0.0) continue;
                double* crow = out.row(i);
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    matmul_into(a, b, out);
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    constexpr std::size_t kTile = 32;
    for (std::size_t r0 = 0; r0 < m.rows(); r0 += kTile) {
        const std::size_t r1 = std::min(r0 + kTile, m.rows());
        for (std::size_t c0 = 0; c0 < m.cols(); c0 += kTile) {
            const std::size_t c1 = std::min(c0 + kTile, m.cols());
            for (std::size_t r = r0; r < r1; ++r)
                for (std::size_t c = c0; c < c1; ++c) t(c, r) = m(r, c);
        }
    }
    return t;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        raise(ErrorCode::Dimension,
              "matrix add: shape mismatch (" + shape_str(a) + " vs " + shape_str(b) + ")");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        raise(ErrorCode::Dimension,
              "matrix subtract: shape mismatch (" + shape_str(a) + " vs " + shape_str(b) + ")");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Matrix operator*(double s, const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
    return out;
}

double frobenius_norm(const Matrix& m) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) sum += m.data()[i] * m.data()[i];
    return std::sqrt(sum);
}

double max_abs(const Matrix& m) {
    double mx = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) mx = std::max(mx, std::fabs(m.data()[i]));
    return mx;
}

double max_asymmetry(const Matrix& m) {
    if (m.rows() != m.cols())
        raise(ErrorCode::Dimension, "max_asymmetry: matrix is not square (" + shape_str(m) + ")");
    double mx = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            mx = std::max(mx, std::fabs(m(i, j) - m(j, i)));
    return mx;
}

} // namespace plab

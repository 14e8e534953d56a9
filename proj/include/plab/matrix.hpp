#pragma once

#include <cstddef>
#include <vector>

#include "plab/error.hpp"

namespace plab {

// Dense real matrix, row-major. The one numeric carrier for the whole lab.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

    bool all_finite() const;
    void fill(double value) { data_.assign(data_.size(), value); }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// c = a * b. Deterministic blocked kernel; errors on shape mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

// Accumulating form used by the hot paths: out += a * b (out must be pre-shaped).
void matmul_into(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

Matrix transpose(const Matrix& m);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& m);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double max_asymmetry(const Matrix& m); // max |m_ij - m_ji|; errors on non-square

} // namespace plab

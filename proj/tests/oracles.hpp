#pragma once

// Test-side reference implementations, kept deliberately naive and separate
// from the production kernels so the two can disagree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "plab/matrix.hpp"
#include "plab/rng.hpp"

namespace oracle {

inline plab::Matrix naive_matmul(const plab::Matrix& a, const plab::Matrix& b) {
    plab::Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < a.cols(); ++l) acc += a(i, l) * b(l, j);
            c(i, j) = acc;
        }
    return c;
}

inline plab::Matrix naive_transpose(const plab::Matrix& m) {
    plab::Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

inline double max_abs_diff(const plab::Matrix& a, const plab::Matrix& b) {
    double mx = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        mx = std::max(mx, std::abs(a.data()[i] - b.data()[i]));
    return mx;
}

inline plab::Matrix random_matrix(std::size_t rows, std::size_t cols, plab::RngStream& rng,
                                  double lo = -1.0, double hi = 1.0) {
    plab::Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

inline plab::Matrix random_symmetric(std::size_t n, plab::RngStream& rng) {
    plab::Matrix a = random_matrix(n, n, rng);
    plab::Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
    return s;
}

struct EigOracle {
    std::vector<double> eigenvalues; // descending
    plab::Matrix eigenvectors;       // columns
};

// Classical (largest-pivot) Jacobi, rotations applied as explicit matrix
// products. Slow and obvious on purpose; n stays small in tests.
inline EigOracle classical_jacobi(plab::Matrix a) {
    const std::size_t n = a.rows();
    plab::Matrix v = plab::Matrix::identity(n);
    double norm = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) norm += a.data()[i] * a.data()[i];
    norm = std::sqrt(norm);
    const double tol = 1e-13 * (norm > 0.0 ? norm : 1.0);

    for (int iter = 0; iter < 100000; ++iter) {
        std::size_t p = 0, q = 1;
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (std::abs(a(i, j)) > mx) {
                    mx = std::abs(a(i, j));
                    p = i;
                    q = j;
                }
        if (n < 2 || mx <= tol) break;

        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t =
            (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        plab::Matrix j = plab::Matrix::identity(n);
        j(p, p) = c;
        j(q, q) = c;
        j(p, q) = s;
        j(q, p) = -s;
        a = naive_matmul(naive_transpose(j), naive_matmul(a, j));
        v = naive_matmul(v, j);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigOracle out;
    out.eigenvalues.resize(n);
    out.eigenvectors = plab::Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, order[k]);
    }
    return out;
}

inline plab::Matrix oracle_pinv(const plab::Matrix& m, double rank_tol = 1e-10) {
    const EigOracle eig = classical_jacobi(m);
    const std::size_t n = m.rows();
    const double lmax = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
    plab::Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        if (eig.eigenvalues[i] > rank_tol * lmax && eig.eigenvalues[i] > 0.0)
            d(i, i) = 1.0 / eig.eigenvalues[i];
    return naive_matmul(eig.eigenvectors, naive_matmul(d, naive_transpose(eig.eigenvectors)));
}

struct ScatterOracle {
    plab::Matrix means; // C x d
    std::vector<double> gmean;
    plab::Matrix sw, sb;
    std::vector<std::size_t> counts;
};

// Per-sample outer-product scatter, no matrix kernels.
inline ScatterOracle oracle_scatter(const plab::Matrix& x, const std::vector<int>& labels,
                                    std::size_t num_classes) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    ScatterOracle o;
    o.counts.assign(num_classes, 0);
    o.means = plab::Matrix(num_classes, d);
    o.gmean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        ++o.counts[y];
        for (std::size_t j = 0; j < d; ++j) {
            o.means(y, j) += x(i, j);
            o.gmean[j] += x(i, j) / static_cast<double>(n);
        }
    }
    for (std::size_t y = 0; y < num_classes; ++y)
        if (o.counts[y] > 0)
            for (std::size_t j = 0; j < d; ++j)
                o.means(y, j) /= static_cast<double>(o.counts[y]);

    o.sw = plab::Matrix(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t s = 0; s < d; ++s)
                o.sw(r, s) += (x(i, r) - o.means(y, r)) * (x(i, s) - o.means(y, s)) /
                              static_cast<double>(n);
    }
    o.sb = plab::Matrix(d, d);
    for (std::size_t y = 0; y < num_classes; ++y) {
        if (o.counts[y] == 0) continue;
        const double w = static_cast<double>(o.counts[y]) / static_cast<double>(n);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t s = 0; s < d; ++s)
                o.sb(r, s) += w * (o.means(y, r) - o.gmean[r]) * (o.means(y, s) - o.gmean[s]);
    }
    return o;
}

inline double oracle_nc1(const ScatterOracle& o, std::size_t num_classes,
                         double rank_tol = 1e-10) {
    const plab::Matrix prod = naive_matmul(o.sw, oracle_pinv(o.sb, rank_tol));
    double trace = 0.0;
    for (std::size_t i = 0; i < prod.rows(); ++i) trace += prod(i, i);
    return trace / static_cast<double>(num_classes);
}

} // namespace oracle

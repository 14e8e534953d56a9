#include "plab/interventions.hpp"

#include <cmath>
#include <string>

#include "plab/rng.hpp"

namespace plab {
namespace interventions {

void ShrinkPerturbParams::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        raise(ErrorCode::InvalidArgument,
              "shrink_and_perturb: lambda must be in [0,1], got " + std::to_string(lambda));
    if (!(b >= 0.0))
        raise(ErrorCode::InvalidArgument,
              "shrink_and_perturb: noise scale must be nonnegative, got " + std::to_string(b));
}

nn::MlpModel shrink_and_perturb(const nn::MlpModel& model, const ShrinkPerturbParams& p) {
    p.validate();
    nn::MlpModel out = model;
    RngStream rng = RngStream(p.seed).derive(rng_purpose::kShrinkPerturb);
    for (std::size_t k = 0; k < out.num_layers(); ++k) {
        auto& layer = out.layer(k);
        const double stddev = std::sqrt(2.0 / static_cast<double>(layer.fan_in()));
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] = p.lambda * layer.weight.data()[i] + p.b * rng.normal(0.0, stddev);
        for (double& v : layer.bias) v = p.lambda * v + p.b * rng.normal(0.0, stddev);
    }
    out.clear_cache();
    return out;
}

void Nc1RegConfig::validate() const {
    if (!(weight >= 0.0) || !std::isfinite(weight))
        raise(ErrorCode::InvalidArgument, "nc1 regularizer: weight must be finite and >= 0");
    if (min_classes_in_batch < 2)
        raise(ErrorCode::InvalidArgument, "nc1 regularizer: min_classes_in_batch must be >= 2");
    if (!(grad_clip >= 0.0) || !std::isfinite(grad_clip))
        raise(ErrorCode::InvalidArgument, "nc1 regularizer: grad_clip must be finite and >= 0");
}

Nc1BatchResult nc1_batch_loss(const Matrix& features, const std::vector<int>& labels,
                              std::size_t num_classes, const Nc1RegConfig& cfg) {
    cfg.validate();
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (labels.size() != n)
        raise(ErrorCode::Dimension, "nc1_batch_loss: " + std::to_string(labels.size()) +
                                        " labels for " + std::to_string(n) + " rows");
    if (num_classes == 0) raise(ErrorCode::InvalidArgument, "nc1_batch_loss: num_classes is zero");

    Nc1BatchResult result;
    result.grad_features = Matrix(n, d);

    std::vector<std::size_t> counts(num_classes, 0);
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
            raise(ErrorCode::InvalidArgument,
                  "nc1_batch_loss: label " + std::to_string(l) + " out of range");
        ++counts[static_cast<std::size_t>(l)];
    }
    std::size_t nonempty = 0;
    for (std::size_t c : counts)
        if (c > 0) ++nonempty;
    if (nonempty < cfg.min_classes_in_batch) {
        result.skipped = true;
        return result;
    }

    // class means and global mean
    Matrix means(num_classes, d);
    std::vector<double> gmean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = features.row(i);
        double* mean = means.row(static_cast<std::size_t>(labels[i]));
        for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < num_classes; ++c) {
        double* mean = means.row(c);
        for (std::size_t j = 0; j < d; ++j) {
            gmean[j] += mean[j] * inv_n;
            if (counts[c] > 0) mean[j] /= static_cast<double>(counts[c]);
        }
    }

    // centered class means u_c; sigma_b = sum w_c u_c u_c^T lives in their span
    std::vector<std::vector<double>> u;
    std::vector<double> w;
    double max_norm2 = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) continue;
        std::vector<double> v(d);
        double norm2 = 0.0;
        const double* mean = means.row(c);
        for (std::size_t j = 0; j < d; ++j) {
            v[j] = mean[j] - gmean[j];
            norm2 += v[j] * v[j];
        }
        max_norm2 = std::max(max_norm2, norm2);
        u.push_back(std::move(v));
        w.push_back(static_cast<double>(counts[c]) * inv_n);
    }

    // orthonormal basis Q of span{u_c} by re-orthogonalized Gram-Schmidt
    std::vector<std::vector<double>> q;
    const double drop_tol2 = 1e-24 * (max_norm2 > 0.0 ? max_norm2 : 1.0);
    for (const auto& uc : u) {
        std::vector<double> v = uc;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& qk : q) {
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += qk[j] * v[j];
                for (std::size_t j = 0; j < d; ++j) v[j] -= dot * qk[j];
            }
        double norm2 = 0.0;
        for (double x : v) norm2 += x * x;
        if (norm2 <= drop_tol2) continue;
        const double inv_norm = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv_norm;
        q.push_back(std::move(v));
    }
    const std::size_t k = q.size();
    if (k == 0) { // all class means coincide: sigma_b vanished
        result.skipped = true;
        return result;
    }

    // sigma_b projected into the basis: S = sum w_c p_c p_c^T, p_c = Q^T u_c
    Matrix s(k, k);
    for (std::size_t c = 0; c < u.size(); ++c) {
        std::vector<double> p(k, 0.0);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t j = 0; j < d; ++j) p[a] += q[a][j] * u[c][j];
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b2 = 0; b2 < k; ++b2) s(a, b2) += w[c] * p[a] * p[b2];
    }

    const EigResult eig = sym_eig(s);
    const double lmax = eig.eigenvalues.front();
    if (lmax < 1e-14) {
        result.skipped = true;
        return result;
    }

    // retained eigenvectors of sigma_b, expressed back in feature space
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < k; ++i)
        if (eig.eigenvalues[i] > cfg.rank_tol * lmax) keep.push_back(i);

    Matrix basis(d, keep.size()); // columns: eigenvectors of sigma_b
    for (std::size_t col = 0; col < keep.size(); ++col)
        for (std::size_t a = 0; a < k; ++a) {
            const double coef = eig.eigenvectors(a, keep[col]);
            for (std::size_t j = 0; j < d; ++j) basis(j, col) += coef * q[a][j];
        }

    // class-centered features
    Matrix centered(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = features.row(i);
        const double* mean = means.row(static_cast<std::size_t>(labels[i]));
        double* out = centered.row(i);
        for (std::size_t j = 0; j < d; ++j) out[j] = row[j] - mean[j];
    }

    // A = centered * basis; penalty = sum_k |A_k|^2 / (N C lambda_k)
    const Matrix a = matmul(centered, basis);
    const double inv_nc = 1.0 / (static_cast<double>(n) * static_cast<double>(num_classes));
    double penalty = 0.0;
    std::vector<double> inv_l(keep.size());
    for (std::size_t col = 0; col < keep.size(); ++col) {
        inv_l[col] = 1.0 / eig.eigenvalues[keep[col]];
        double col_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) col_sq += a(i, col) * a(i, col);
        penalty += col_sq * inv_l[col];
    }
    result.penalty = penalty * inv_nc;
    if (result.penalty < 0.0) result.penalty = 0.0;

    // grad = (2/(N C)) * centered * pinv(sigma_b) = (2/(N C)) * A diag(1/l) basis^T
    Matrix scaled = a;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t col = 0; col < keep.size(); ++col) scaled(i, col) *= inv_l[col];
    result.grad_features = matmul(scaled, transpose(basis));
    const double f = 2.0 * inv_nc;
    for (std::size_t i = 0; i < result.grad_features.size(); ++i)
        result.grad_features.data()[i] *= f;

    if (cfg.grad_clip > 0.0 && cfg.weight > 0.0) {
        double g2 = 0.0, f2 = 0.0;
        for (std::size_t i = 0; i < result.grad_features.size(); ++i) {
            const double v = result.grad_features.data()[i];
            g2 += v * v;
        }
        for (std::size_t i = 0; i < features.size(); ++i) {
            const double v = features.data()[i];
            f2 += v * v;
        }
        // the caller applies weight * grad; keep that product within
        // grad_clip * ||features||_F
        const double weighted = cfg.weight * std::sqrt(g2);
        const double cap = cfg.grad_clip * std::sqrt(f2);
        if (weighted > cap) {
            const double shrink = cap / weighted;
            for (std::size_t i = 0; i < result.grad_features.size(); ++i)
                result.grad_features.data()[i] *= shrink;
        }
    }
    return result;
}

} // namespace interventions
} // namespace plab

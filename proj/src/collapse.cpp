#include "plab/collapse.hpp"

#include <cmath>
#include <string>

namespace plab {
namespace collapse {

void FeatureBatch::validate() const {
    if (features.rows() == 0 || features.cols() == 0)
        raise(ErrorCode::InvalidArgument, "feature batch: empty feature matrix");
    if (labels.size() != features.rows())
        raise(ErrorCode::Dimension, "feature batch: " + std::to_string(labels.size()) +
                                        " labels for " + std::to_string(features.rows()) +
                                        " feature rows");
    if (num_classes == 0) raise(ErrorCode::InvalidArgument, "feature batch: num_classes is zero");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
            raise(ErrorCode::InvalidArgument,
                  "feature batch: label " + std::to_string(l) + " out of range [0, " +
                      std::to_string(num_classes) + ")");
}

std::size_t ScatterStats::nonempty_classes() const {
    std::size_t n = 0;
    for (std::size_t c : class_counts)
        if (c > 0) ++n;
    return n;
}

std::size_t ScatterStats::total_count() const {
    std::size_t n = 0;
    for (std::size_t c : class_counts) n += c;
    return n;
}

ScatterStats accumulate_stats(const FeatureBatch& batch) {
    batch.validate();
    const std::size_t n = batch.features.rows();
    const std::size_t d = batch.features.cols();
    const std::size_t c = batch.num_classes;

    ScatterStats stats;
    stats.class_counts.assign(c, 0);
    stats.class_means = Matrix(c, d);
    stats.global_mean.assign(d, 0.0);

    // pass 1: means
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = static_cast<std::size_t>(batch.labels[i]);
        ++stats.class_counts[y];
        const double* row = batch.features.row(i);
        double* mean = stats.class_means.row(y);
        for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    }
    if (stats.nonempty_classes() < 2)
        raise(ErrorCode::InvalidArgument,
              "accumulate_stats: need at least 2 nonempty classes, got " +
                  std::to_string(stats.nonempty_classes()));

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t y = 0; y < c; ++y) {
        double* mean = stats.class_means.row(y);
        for (std::size_t j = 0; j < d; ++j) {
            stats.global_mean[j] += mean[j] * inv_n;
            if (stats.class_counts[y] > 0) mean[j] /= static_cast<double>(stats.class_counts[y]);
        }
    }

    // pass 2: within-class scatter from class-centered rows
    Matrix centered(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = static_cast<std::size_t>(batch.labels[i]);
        const double* row = batch.features.row(i);
        const double* mean = stats.class_means.row(y);
        double* out = centered.row(i);
        for (std::size_t j = 0; j < d; ++j) out[j] = row[j] - mean[j];
    }
    stats.sigma_w = matmul(transpose(centered), centered);
    for (std::size_t i = 0; i < stats.sigma_w.size(); ++i) stats.sigma_w.data()[i] *= inv_n;

    // between-class scatter from count-weighted centered class means
    stats.sigma_b = Matrix(d, d);
    std::vector<double> diff(d);
    for (std::size_t y = 0; y < c; ++y) {
        if (stats.class_counts[y] == 0) continue;
        const double w = static_cast<double>(stats.class_counts[y]) * inv_n;
        const double* mean = stats.class_means.row(y);
        for (std::size_t j = 0; j < d; ++j) diff[j] = mean[j] - stats.global_mean[j];
        for (std::size_t r = 0; r < d; ++r) {
            double* out = stats.sigma_b.row(r);
            const double wr = w * diff[r];
            for (std::size_t s = 0; s < d; ++s) out[s] += wr * diff[s];
        }
    }
    return stats;
}

Nc1Result nc1_detail(const ScatterStats& stats, double rank_tol) {
    const EigResult eig = sym_eig(stats.sigma_b);
    const double lmax = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
    if (lmax < 1e-14)
        raise(ErrorCode::Numeric, "nc1: between-class variance vanished (largest eigenvalue " +
                                      std::to_string(lmax) + ")");

    // pinv(sigma_b) from the decomposition we already have
    const std::size_t d = stats.sigma_b.rows();
    Matrix scaled = eig.eigenvectors; // columns scaled by 1/lambda where retained
    for (std::size_t j = 0; j < d; ++j) {
        const double l = eig.eigenvalues[j];
        const double f = (l > rank_tol * lmax) ? 1.0 / l : 0.0;
        for (std::size_t i = 0; i < d; ++i) scaled(i, j) *= f;
    }
    const Matrix pinv_b = matmul(scaled, transpose(eig.eigenvectors));

    // Tr(A B) with both symmetric: elementwise product sum
    double trace = 0.0;
    for (std::size_t i = 0; i < stats.sigma_w.size(); ++i)
        trace += stats.sigma_w.data()[i] * pinv_b.data()[i];

    Nc1Result out;
    out.value = trace / static_cast<double>(stats.num_classes());
    if (out.value < 0.0) {
        if (out.value < -1e-10)
            raise(ErrorCode::Numeric, "nc1: negative beyond round-off: " +
                                          std::to_string(out.value));
        out.value = 0.0;
        out.clamped = true;
    }
    return out;
}

double nc1(const ScatterStats& stats, double rank_tol) {
    return nc1_detail(stats, rank_tol).value;
}

Nc2Result nc2(const ScatterStats& stats) {
    const std::size_t d = stats.class_means.cols();
    std::vector<std::vector<double>> centered;
    for (std::size_t y = 0; y < stats.num_classes(); ++y) {
        if (stats.class_counts[y] == 0) continue;
        std::vector<double> v(d);
        const double* mean = stats.class_means.row(y);
        for (std::size_t j = 0; j < d; ++j) v[j] = mean[j] - stats.global_mean[j];
        centered.push_back(std::move(v));
    }
    const std::size_t c = centered.size();
    if (c < 2) raise(ErrorCode::InvalidArgument, "nc2: need at least 2 nonempty classes");

    std::vector<double> norms(c);
    for (std::size_t i = 0; i < c; ++i) {
        double s = 0.0;
        for (double v : centered[i]) s += v * v;
        norms[i] = std::sqrt(s);
        if (norms[i] < 1e-14)
            raise(ErrorCode::Numeric, "nc2: centered class mean has vanishing norm");
    }

    double mean_norm = 0.0;
    for (double v : norms) mean_norm += v;
    mean_norm /= static_cast<double>(c);
    double var_norm = 0.0;
    for (double v : norms) var_norm += (v - mean_norm) * (v - mean_norm);
    var_norm /= static_cast<double>(c);

    Nc2Result out;
    out.norm_cv = std::sqrt(var_norm) / mean_norm;

    std::vector<double> cosines;
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = i + 1; j < c; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += centered[i][k] * centered[j][k];
            cosines.push_back(dot / (norms[i] * norms[j]));
        }

    const double target = -1.0 / static_cast<double>(c - 1);
    double mean_cos = 0.0, mean_abs_dev = 0.0;
    for (double v : cosines) {
        mean_cos += v;
        mean_abs_dev += std::abs(v - target);
    }
    mean_cos /= static_cast<double>(cosines.size());
    mean_abs_dev /= static_cast<double>(cosines.size());
    double var_cos = 0.0;
    for (double v : cosines) var_cos += (v - mean_cos) * (v - mean_cos);
    var_cos /= static_cast<double>(cosines.size());

    out.angle_dev = std::sqrt(var_cos) + mean_abs_dev;
    return out;
}

double nc3(const ScatterStats& stats, const Matrix& classifier_weight) {
    const std::size_t c = stats.num_classes();
    const std::size_t d = stats.class_means.cols();
    if (classifier_weight.rows() != c || classifier_weight.cols() != d)
        raise(ErrorCode::Dimension, "nc3: classifier is " +
                                        std::to_string(classifier_weight.rows()) + "x" +
                                        std::to_string(classifier_weight.cols()) + ", expected " +
                                        std::to_string(c) + "x" + std::to_string(d));
    for (std::size_t y = 0; y < c; ++y)
        if (stats.class_counts[y] == 0)
            raise(ErrorCode::InvalidArgument,
                  "nc3: class " + std::to_string(y) + " has no samples");

    Matrix m_tilde(c, d);
    for (std::size_t y = 0; y < c; ++y)
        for (std::size_t j = 0; j < d; ++j)
            m_tilde(y, j) = stats.class_means(y, j) - stats.global_mean[j];

    const double wn = frobenius_norm(classifier_weight);
    const double mn = frobenius_norm(m_tilde);
    if (wn < 1e-14 || mn < 1e-14)
        raise(ErrorCode::Numeric, "nc3: zero-norm classifier or class-mean matrix");

    double sum = 0.0;
    for (std::size_t i = 0; i < m_tilde.size(); ++i) {
        const double diff = classifier_weight.data()[i] / wn - m_tilde.data()[i] / mn;
        sum += diff * diff;
    }
    return sum;
}

double nc4(const Matrix& logits, const FeatureBatch& batch, const ScatterStats& stats) {
    batch.validate();
    const std::size_t n = batch.features.rows();
    const std::size_t d = batch.features.cols();
    if (logits.rows() != n || logits.cols() != stats.num_classes())
        raise(ErrorCode::Dimension, "nc4: logits shape does not match batch/stats");
    if (stats.class_means.cols() != d)
        raise(ErrorCode::Dimension, "nc4: stats were computed on a different feature width");

    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = logits.row(i);
        std::size_t argmax = 0;
        for (std::size_t j = 1; j < logits.cols(); ++j)
            if (row[j] > row[argmax]) argmax = j;

        const double* x = batch.features.row(i);
        std::size_t nearest = 0;
        double best = -1.0;
        bool found = false;
        for (std::size_t y = 0; y < stats.num_classes(); ++y) {
            if (stats.class_counts[y] == 0) continue;
            const double* mean = stats.class_means.row(y);
            double dist = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x[j] - mean[j];
                dist += diff * diff;
            }
            if (!found || dist < best) {
                best = dist;
                nearest = y;
                found = true;
            }
        }
        if (argmax != nearest) ++mismatches;
    }
    return static_cast<double>(mismatches) / static_cast<double>(n);
}

CollapseReport report(const FeatureBatch& batch, const Matrix& logits,
                      const Matrix& classifier_weight, double rank_tol) {
    const ScatterStats stats = accumulate_stats(batch);
    const Nc1Result n1 = nc1_detail(stats, rank_tol);
    const Nc2Result n2 = nc2(stats);

    CollapseReport rep;
    rep.nc1 = n1.value;
    rep.nc1_clamped = n1.clamped;
    rep.nc2_norm_cv = n2.norm_cv;
    rep.nc2_angle_dev = n2.angle_dev;
    rep.nc3 = nc3(stats, classifier_weight);
    rep.nc4_mismatch = nc4(logits, batch, stats);
    return rep;
}

} // namespace collapse
} // namespace plab

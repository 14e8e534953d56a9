#pragma once

#include <cstddef>
#include <vector>

#include "plab/eig.hpp"
#include "plab/matrix.hpp"

namespace plab {
namespace collapse {

// Last-layer activations with their class labels.
struct FeatureBatch {
    Matrix features;         // N x d
    std::vector<int> labels; // length N, values in [0, num_classes)
    std::size_t num_classes = 0;

    void validate() const;
};

struct ScatterStats {
    Matrix class_means; // C x d (zero rows for empty classes)
    std::vector<double> global_mean;
    Matrix sigma_w; // within-class covariance, d x d
    Matrix sigma_b; // between-class covariance, d x d
    std::vector<std::size_t> class_counts;

    std::size_t num_classes() const { return class_counts.size(); }
    std::size_t nonempty_classes() const;
    std::size_t total_count() const;
};

// Two-pass scatter computation: means first, then population (1/N)
// covariances. Requires at least two nonempty classes.
ScatterStats accumulate_stats(const FeatureBatch& batch);

struct Nc1Result {
    double value = 0.0;
    bool clamped = false; // true when a tiny negative round-off was clamped to 0
};

// Tr(sigma_w . pinv(sigma_b)) / C. Errors when sigma_b has vanished.
Nc1Result nc1_detail(const ScatterStats& stats, double rank_tol = kDefaultRankTol);
double nc1(const ScatterStats& stats, double rank_tol = kDefaultRankTol);

struct Nc2Result {
    double norm_cv = 0.0;   // std/mean of centered class-mean norms
    double angle_dev = 0.0; // pairwise-cosine spread + offset from -1/(C-1)
};

Nc2Result nc2(const ScatterStats& stats);

// Squared Frobenius distance between the unit-normalized classifier matrix
// and the unit-normalized centered class-mean matrix.
double nc3(const ScatterStats& stats, const Matrix& classifier_weight);

// Fraction of samples where the classifier argmax disagrees with the
// nearest-class-center rule. Ties break toward the smaller class index.
double nc4(const Matrix& logits, const FeatureBatch& batch, const ScatterStats& stats);

struct CollapseReport {
    double nc1 = 0.0;
    double nc2_norm_cv = 0.0;
    double nc2_angle_dev = 0.0;
    double nc3 = 0.0;
    double nc4_mismatch = 0.0;
    bool nc1_clamped = false;
    int task = -1;
    int epoch = -1;
};

// All four metrics from one feature batch plus the matching logits and
// classifier weight.
CollapseReport report(const FeatureBatch& batch, const Matrix& logits,
                      const Matrix& classifier_weight, double rank_tol = kDefaultRankTol);

} // namespace collapse
} // namespace plab

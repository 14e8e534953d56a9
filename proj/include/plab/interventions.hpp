#pragma once

#include <cstdint>
#include <vector>

#include "plab/eig.hpp"
#include "plab/matrix.hpp"
#include "plab/nn.hpp"

namespace plab {
namespace interventions {

struct ShrinkPerturbParams {
    double lambda = 0.6;
    double b = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

// theta_sp = lambda * theta + b * eps with eps ~ N(0, 2/fan_in), drawn per
// parameter from a stream derived from `seed`. Biases use their layer's
// fan-in as well. The input model is untouched.
nn::MlpModel shrink_and_perturb(const nn::MlpModel& model, const ShrinkPerturbParams& p);

// rank_tol is deliberately much coarser than the metric default: a minibatch
// estimate of sigma_b carries sampling noise, and inverting eigenvalues below
// a percent of the top one amplifies that noise into the gradient enough to
// destroy training. grad_clip bounds the weighted penalty gradient to that
// fraction of the batch feature norm (0 disables); early in training sigma_b
// is nearly singular and the unclipped 1/lambda factors kill the network in a
// couple of epochs at any usable learning rate.
struct Nc1RegConfig {
    double weight = 0.05;
    std::size_t min_classes_in_batch = 2;
    double rank_tol = 1e-2;
    double grad_clip = 0.5;

    void validate() const;
};

struct Nc1BatchResult {
    double penalty = 0.0;   // batch NC1, same formula as collapse::nc1
    Matrix grad_features;   // N x d gradient of the penalty, pinv(sigma_b) frozen
    bool skipped = false;   // batch lacked class diversity (or sigma_b vanished)
};

// Batch-wise NC1 penalty with its analytic feature gradient. The
// pseudoinverse of sigma_b is treated as a constant of the batch
// (stop-gradient), so grad = (2 / (N C)) * pinv(sigma_b) * (x_i - mu_{c_i}).
// Degenerate batches (fewer than min_classes_in_batch nonempty classes, or a
// numerically vanished sigma_b) skip the penalty instead of aborting the run.
//
// The computation runs in the span of the centered class means (dimension
// < C), which keeps per-batch cost at O(N d C) instead of an O(d^3)
// eigendecomposition; the result is the same because sigma_b's range is
// exactly that span.
Nc1BatchResult nc1_batch_loss(const Matrix& features, const std::vector<int>& labels,
                              std::size_t num_classes, const Nc1RegConfig& cfg);

} // namespace interventions
} // namespace plab

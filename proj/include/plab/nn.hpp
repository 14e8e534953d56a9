#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plab/matrix.hpp"
#include "plab/rng.hpp"

namespace plab {
namespace nn {

struct SgdConfig {
    double learning_rate = 0.01;
    double momentum = 0.0;

    void validate() const;
};

struct LinearLayer {
    Matrix weight;            // out x in
    std::vector<double> bias; // out

    std::size_t fan_in() const { return weight.cols(); }
    std::size_t fan_out() const { return weight.rows(); }
};

// Fully-connected rectifier network. The output of the last hidden layer
// (post-activation) is the "feature" vector fed to the classifier head;
// forward() caches everything backward() needs.
class MlpModel {
public:
    MlpModel() = default;
    MlpModel(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
             std::size_t num_classes);

    // He-style init: weights N(0, 2/fan_in), biases zero.
    void init_weights(RngStream& rng);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t num_classes() const { return num_classes_; }
    std::size_t feature_dim() const; // width of the last hidden layer
    std::size_t num_layers() const { return layers_.size(); }
    std::size_t parameter_count() const;

    static std::size_t parameter_count(std::size_t input_dim,
                                       const std::vector<std::size_t>& hidden_dims,
                                       std::size_t num_classes);

    LinearLayer& layer(std::size_t i) { return layers_[i]; }
    const LinearLayer& layer(std::size_t i) const { return layers_[i]; }
    const Matrix& classifier_weight() const { return layers_.back().weight; }

    struct ForwardResult {
        Matrix logits;   // N x C
        Matrix features; // N x h_last
    };

    // Runs the batch through the network and caches intermediates.
    ForwardResult forward(const Matrix& batch);

    // Inference-only forward; does not touch the backward cache.
    ForwardResult forward_inference(const Matrix& batch) const;

    // SGD step from the cached forward pass. `extra_feature_grad`, when given,
    // is added to the gradient at the feature stage (post-activation output of
    // the last hidden layer) before propagating further down.
    void backward_and_step(const Matrix& grad_logits, const Matrix* extra_feature_grad,
                           const SgdConfig& cfg);

    void clear_cache();
    bool has_cache() const { return cache_valid_; }

    // FNV-1a over the exact parameter bytes; identical parameters <=> identical hash.
    std::uint64_t parameter_hash() const;

    void save(const std::string& path) const;
    static MlpModel load(const std::string& path);

    bool operator==(const MlpModel& other) const;

private:
    std::size_t input_dim_ = 0;
    std::size_t num_classes_ = 0;
    std::vector<std::size_t> hidden_dims_;
    std::vector<LinearLayer> layers_;

    // forward cache
    bool cache_valid_ = false;
    Matrix cached_input_;
    std::vector<Matrix> pre_activations_;  // z_k, one per layer
    std::vector<Matrix> post_activations_; // a_k for hidden layers

    // momentum buffers, lazily created
    std::vector<Matrix> velocity_w_;
    std::vector<std::vector<double>> velocity_b_;

    ForwardResult run_forward(const Matrix& batch, bool cache) const;
};

struct CrossEntropyResult {
    double loss = 0.0;
    Matrix grad_logits; // (softmax - onehot) / N
};

// Mean negative log-softmax of the true class, max-stabilized.
CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<int>& labels);

// Fraction of rows whose argmax logit matches the label (ties toward the
// smaller class index). Errors on an empty dataset.
double evaluate_accuracy(const MlpModel& model, const Matrix& images,
                         const std::vector<int>& labels, std::size_t eval_batch = 256);

} // namespace nn
} // namespace plab

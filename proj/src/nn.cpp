#include "plab/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace plab {
namespace nn {

namespace {

void add_bias_rows(Matrix& m, const std::vector<double>& bias) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double* row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) row[c] += bias[c];
    }
}

Matrix relu(const Matrix& z) {
    Matrix a = z;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.data()[i] < 0.0) a.data()[i] = 0.0;
    return a;
}

std::vector<double> column_sums(const Matrix& m) {
    std::vector<double> sums(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double* row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) sums[c] += row[c];
    }
    return sums;
}

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
}

} // namespace

void SgdConfig::validate() const {
    if (!(learning_rate > 0.0))
        raise(ErrorCode::InvalidArgument, "sgd: learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0)
        raise(ErrorCode::InvalidArgument, "sgd: momentum must be in [0, 1)");
}

MlpModel::MlpModel(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims,
                   std::size_t num_classes)
    : input_dim_(input_dim), num_classes_(num_classes), hidden_dims_(hidden_dims) {
    if (input_dim == 0 || num_classes == 0)
        raise(ErrorCode::InvalidArgument, "mlp: input_dim and num_classes must be positive");
    std::size_t in = input_dim;
    for (std::size_t h : hidden_dims) {
        if (h == 0) raise(ErrorCode::InvalidArgument, "mlp: hidden width must be positive");
        layers_.push_back(LinearLayer{Matrix(h, in), std::vector<double>(h, 0.0)});
        in = h;
    }
    layers_.push_back(LinearLayer{Matrix(num_classes, in), std::vector<double>(num_classes, 0.0)});
}

void MlpModel::init_weights(RngStream& rng) {
    for (auto& layer : layers_) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(layer.fan_in()));
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] = rng.normal(0.0, stddev);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    cache_valid_ = false;
    velocity_w_.clear();
    velocity_b_.clear();
}

std::size_t MlpModel::feature_dim() const {
    return hidden_dims_.empty() ? input_dim_ : hidden_dims_.back();
}

std::size_t MlpModel::parameter_count() const {
    std::size_t count = 0;
    for (const auto& layer : layers_) count += layer.weight.size() + layer.bias.size();
    return count;
}

std::size_t MlpModel::parameter_count(std::size_t input_dim,
                                      const std::vector<std::size_t>& hidden_dims,
                                      std::size_t num_classes) {
    std::size_t count = 0;
    std::size_t in = input_dim;
    for (std::size_t h : hidden_dims) {
        count += h * in + h;
        in = h;
    }
    return count + num_classes * in + num_classes;
}

MlpModel::ForwardResult MlpModel::run_forward(const Matrix& batch, bool cache) const {
    if (batch.cols() != input_dim_)
        raise(ErrorCode::Dimension, "forward: batch has " + std::to_string(batch.cols()) +
                                        " columns, model expects " + std::to_string(input_dim_));
    auto* self = const_cast<MlpModel*>(this);
    if (cache) {
        self->cached_input_ = batch;
        self->pre_activations_.clear();
        self->post_activations_.clear();
    }

    Matrix a = batch;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        Matrix z = matmul(a, transpose(layers_[k].weight));
        add_bias_rows(z, layers_[k].bias);
        const bool last = (k + 1 == layers_.size());
        if (cache) self->pre_activations_.push_back(z);
        if (last) {
            ForwardResult out{std::move(z), std::move(a)};
            if (cache) self->cache_valid_ = true;
            return out;
        }
        a = relu(z);
        if (cache) self->post_activations_.push_back(a);
    }
    raise(ErrorCode::Internal, "forward: model has no layers");
}

MlpModel::ForwardResult MlpModel::forward(const Matrix& batch) {
    return run_forward(batch, true);
}

MlpModel::ForwardResult MlpModel::forward_inference(const Matrix& batch) const {
    return run_forward(batch, false);
}

void MlpModel::clear_cache() {
    cache_valid_ = false;
    cached_input_ = Matrix();
    pre_activations_.clear();
    post_activations_.clear();
}

void MlpModel::backward_and_step(const Matrix& grad_logits, const Matrix* extra_feature_grad,
                                 const SgdConfig& cfg) {
    cfg.validate();
    if (!cache_valid_)
        raise(ErrorCode::State, "backward_and_step: no cached forward pass for this model");
    const std::size_t batch_n = cached_input_.rows();
    if (grad_logits.rows() != batch_n || grad_logits.cols() != num_classes_)
        raise(ErrorCode::Dimension, "backward_and_step: grad_logits shape mismatch");
    if (extra_feature_grad &&
        (extra_feature_grad->rows() != batch_n || extra_feature_grad->cols() != feature_dim()))
        raise(ErrorCode::Dimension, "backward_and_step: extra_feature_grad must be N x " +
                                        std::to_string(feature_dim()));

    if (velocity_w_.empty() && cfg.momentum > 0.0) {
        for (const auto& layer : layers_) {
            velocity_w_.emplace_back(layer.weight.rows(), layer.weight.cols());
            velocity_b_.emplace_back(layer.bias.size(), 0.0);
        }
    }

    Matrix delta = grad_logits;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const Matrix& a_prev = (k == 0) ? cached_input_ : post_activations_[k - 1];
        Matrix grad_w = matmul(transpose(delta), a_prev);
        std::vector<double> grad_b = column_sums(delta);

        if (k > 0) {
            // Gradient w.r.t. the layer input, before this layer's weights move.
            Matrix da = matmul(delta, layers_[k].weight);
            if (k == layers_.size() - 1 && extra_feature_grad) {
                for (std::size_t i = 0; i < da.size(); ++i)
                    da.data()[i] += extra_feature_grad->data()[i];
            }
            const Matrix& z_prev = pre_activations_[k - 1];
            for (std::size_t i = 0; i < da.size(); ++i)
                if (z_prev.data()[i] <= 0.0) da.data()[i] = 0.0;
            delta = std::move(da);
        }

        LinearLayer& layer = layers_[k];
        if (cfg.momentum > 0.0) {
            Matrix& vw = velocity_w_[k];
            std::vector<double>& vb = velocity_b_[k];
            for (std::size_t i = 0; i < vw.size(); ++i) {
                vw.data()[i] = cfg.momentum * vw.data()[i] + grad_w.data()[i];
                layer.weight.data()[i] -= cfg.learning_rate * vw.data()[i];
            }
            for (std::size_t i = 0; i < vb.size(); ++i) {
                vb[i] = cfg.momentum * vb[i] + grad_b[i];
                layer.bias[i] -= cfg.learning_rate * vb[i];
            }
        } else {
            for (std::size_t i = 0; i < layer.weight.size(); ++i)
                layer.weight.data()[i] -= cfg.learning_rate * grad_w.data()[i];
            for (std::size_t i = 0; i < layer.bias.size(); ++i)
                layer.bias[i] -= cfg.learning_rate * grad_b[i];
        }
    }
    clear_cache();
}

std::uint64_t MlpModel::parameter_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& layer : layers_) {
        hash_bytes(h, layer.weight.data(), layer.weight.size() * sizeof(double));
        hash_bytes(h, layer.bias.data(), layer.bias.size() * sizeof(double));
    }
    return h;
}

bool MlpModel::operator==(const MlpModel& other) const {
    if (input_dim_ != other.input_dim_ || num_classes_ != other.num_classes_ ||
        hidden_dims_ != other.hidden_dims_)
        return false;
    for (std::size_t k = 0; k < layers_.size(); ++k)
        if (!(layers_[k].weight == other.layers_[k].weight) ||
            layers_[k].bias != other.layers_[k].bias)
            return false;
    return true;
}

namespace {
constexpr char kModelMagic[8] = {'P', 'L', 'A', 'B', 'M', 'L', 'P', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        raise(ErrorCode::Io, "model load: truncated file " + path);
    return v;
}
} // namespace

void MlpModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::Io, "model save: cannot open " + path);
    out.write(kModelMagic, sizeof(kModelMagic));
    write_u64(out, input_dim_);
    write_u64(out, hidden_dims_.size());
    for (std::size_t h : hidden_dims_) write_u64(out, h);
    write_u64(out, num_classes_);
    for (const auto& layer : layers_) {
        out.write(reinterpret_cast<const char*>(layer.weight.data()),
                  static_cast<std::streamsize>(layer.weight.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(layer.bias.data()),
                  static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
    }
    if (!out) raise(ErrorCode::Io, "model save: write failed for " + path);
}

MlpModel MlpModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::Io, "model load: cannot open " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kModelMagic, 8) != 0)
        raise(ErrorCode::Parse, "model load: bad magic in " + path);
    const std::uint64_t input_dim = read_u64(in, path);
    const std::uint64_t n_hidden = read_u64(in, path);
    std::vector<std::size_t> hidden(n_hidden);
    for (auto& h : hidden) h = read_u64(in, path);
    const std::uint64_t num_classes = read_u64(in, path);
    MlpModel model(input_dim, hidden, num_classes);
    for (auto& layer : model.layers_) {
        if (!in.read(reinterpret_cast<char*>(layer.weight.data()),
                     static_cast<std::streamsize>(layer.weight.size() * sizeof(double))) ||
            !in.read(reinterpret_cast<char*>(layer.bias.data()),
                     static_cast<std::streamsize>(layer.bias.size() * sizeof(double))))
            raise(ErrorCode::Io, "model load: truncated parameters in " + path);
    }
    return model;
}

CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    const std::size_t n = logits.rows();
    const std::size_t c = logits.cols();
    if (labels.size() != n)
        raise(ErrorCode::Dimension, "cross_entropy: " + std::to_string(labels.size()) +
                                        " labels for " + std::to_string(n) + " rows");
    if (n == 0) raise(ErrorCode::InvalidArgument, "cross_entropy: empty batch");

    CrossEntropyResult result;
    result.grad_logits = Matrix(n, c);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            raise(ErrorCode::InvalidArgument, "cross_entropy: label " + std::to_string(y) +
                                                  " out of range [0, " + std::to_string(c) + ")");
        const double* row = logits.row(i);
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
        const double log_sum = std::log(sum);
        loss -= (row[y] - mx) - log_sum;
        double* grad = result.grad_logits.row(i);
        for (std::size_t j = 0; j < c; ++j) grad[j] = std::exp(row[j] - mx) / sum * inv_n;
        grad[y] -= inv_n;
    }
    result.loss = loss * inv_n;
    return result;
}

double evaluate_accuracy(const MlpModel& model, const Matrix& images,
                         const std::vector<int>& labels, std::size_t eval_batch) {
    const std::size_t n = images.rows();
    if (n == 0) raise(ErrorCode::InvalidArgument, "evaluate: empty dataset");
    if (labels.size() != n)
        raise(ErrorCode::Dimension, "evaluate: images/labels count mismatch");
    if (eval_batch == 0) eval_batch = n;

    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += eval_batch) {
        const std::size_t stop = std::min(start + eval_batch, n);
        Matrix batch(stop - start, images.cols());
        for (std::size_t i = start; i < stop; ++i)
            std::copy(images.row(i), images.row(i) + images.cols(), batch.row(i - start));
        const Matrix logits = model.forward_inference(batch).logits;
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            const double* row = logits.row(i);
            std::size_t best = 0;
            for (std::size_t j = 1; j < logits.cols(); ++j)
                if (row[j] > row[best]) best = j;
            if (static_cast<long>(best) == labels[start + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

} // namespace nn
} // namespace plab

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "plab/matrix.hpp"
#include "plab/rng.hpp"

namespace plab {
namespace data {

struct LabeledDataset {
    Matrix images;           // N x D, values in [0,1] as loaded
    std::vector<int> labels; // values in [0, 10)
    std::string source;

    std::size_t size() const { return images.rows(); }
    std::size_t dim() const { return images.cols(); }
    void validate() const;
};

// --- loaders -----------------------------------------------------------

// Big-endian IDX pair (image magic 0x00000803, label magic 0x00000801).
// Pixels are scaled byte/255.
LabeledDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: 3073-byte records, 1 label byte + 3072 RGB-planar
// pixels. `channel_mean_normalize` subtracts the per-channel dataset mean.
LabeledDataset load_cifar10_binary(const std::vector<std::string>& paths,
                                   bool channel_mean_normalize = false);

// --- fixture writers (inverse of the loaders, byte-quantized) ----------

void write_mnist_idx(const LabeledDataset& ds, const std::string& images_path,
                     const std::string& labels_path);

void write_cifar10_binary(const LabeledDataset& ds, const std::string& path);

// --- permuted tasks -----------------------------------------------------

struct PermutedTask {
    std::size_t task_index = 0;
    std::vector<std::size_t> permutation; // output pixel j reads input pixel permutation[j]
    std::uint64_t seed = 0;

    bool is_identity() const;
    std::vector<std::size_t> inverse() const;
};

LabeledDataset apply_permutation(const LabeledDataset& ds,
                                 const std::vector<std::size_t>& permutation);

// Fisher-Yates permutation from RngStream(seed, task_index), applied to every
// image. Task 0 keeps the identity by default so the first task is the plain
// dataset.
std::pair<LabeledDataset, PermutedTask> make_permuted_task(const LabeledDataset& base,
                                                           std::size_t task_index,
                                                           std::uint64_t seed,
                                                           bool identity_task0 = true);

// --- warm-start split ---------------------------------------------------

struct WarmStartSplit {
    LabeledDataset warmup; // floor(N/2) uniformly chosen rows of full
    LabeledDataset full;
    std::uint64_t seed = 0;
    std::vector<std::size_t> warmup_indices; // ascending
};

WarmStartSplit split_warmup(const LabeledDataset& full, std::uint64_t seed);

// --- minibatch streams ---------------------------------------------------

// Index partition for one epoch: seeded shuffle, short final batch kept.
std::vector<std::vector<std::size_t>> minibatch_indices(std::size_t n, std::size_t batch_size,
                                                        std::uint64_t seed, std::uint64_t epoch);

struct Minibatch {
    Matrix images;
    std::vector<int> labels;
};

Minibatch gather(const LabeledDataset& ds, const std::vector<std::size_t>& indices);

// Row subset in the given order (used for fixed desk-scale subsets).
LabeledDataset take(const LabeledDataset& ds, const std::vector<std::size_t>& indices);
LabeledDataset head(const LabeledDataset& ds, std::size_t n);

// --- synthetic image sets -------------------------------------------------

// Byte-quantized class-template mixtures. Each class owns `modes_per_class`
// templates at `class_sep` spread around a shared base image; samples jitter
// the template amplitude and add pixel noise. Deterministic per seed, and
// exactly representable as 8-bit image files (so loader round-trips are
// lossless).
struct SynthConfig {
    std::size_t n = 1000;
    std::size_t dim = 784;
    std::size_t num_classes = 10;
    std::size_t modes_per_class = 2;
    double class_sep = 0.25;
    double amplitude_jitter = 0.15;
    double noise = 0.15;
    std::uint64_t seed = 0;
    std::string source = "synthetic";

    void validate() const;
};

LabeledDataset synthesize_dataset(const SynthConfig& cfg);

} // namespace data
} // namespace plab

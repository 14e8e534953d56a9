#include "plab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace plab {
namespace data {

namespace {

std::vector<unsigned char> read_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::Io, std::string(what) + ": cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_u32_be(const std::vector<unsigned char>& bytes, std::size_t offset,
                          const std::string& path, const char* what) {
    if (offset + 4 > bytes.size())
        raise(ErrorCode::Parse, std::string(what) + ": truncated header in " + path +
                                    " (offset " + std::to_string(offset) + ")");
    return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

unsigned char quantize_pixel(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0))
        raise(ErrorCode::InvalidArgument,
              std::string(what) + ": pixel value " + std::to_string(v) + " outside [0,1]");
    return static_cast<unsigned char>(std::lround(v * 255.0));
}

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;

} // namespace

void LabeledDataset::validate() const {
    if (labels.size() != images.rows())
        raise(ErrorCode::Dimension, "dataset: " + std::to_string(labels.size()) + " labels for " +
                                        std::to_string(images.rows()) + " images");
    for (int l : labels)
        if (l < 0 || l >= 10)
            raise(ErrorCode::InvalidArgument,
                  "dataset: label " + std::to_string(l) + " outside [0, 10)");
    if (!images.all_finite()) raise(ErrorCode::Numeric, "dataset: non-finite pixel values");
}

LabeledDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img_bytes = read_file(images_path, "mnist");
    const std::uint32_t img_magic = read_u32_be(img_bytes, 0, images_path, "mnist");
    if (img_magic != kIdxImageMagic)
        raise(ErrorCode::Parse, "mnist: bad magic " + hex32(img_magic) + " in " + images_path +
                                    " (expected " + hex32(kIdxImageMagic) + ")");
    const std::uint32_t n = read_u32_be(img_bytes, 4, images_path, "mnist");
    const std::uint32_t rows = read_u32_be(img_bytes, 8, images_path, "mnist");
    const std::uint32_t cols = read_u32_be(img_bytes, 12, images_path, "mnist");
    const std::size_t dim = std::size_t(rows) * cols;
    const std::size_t need = 16 + std::size_t(n) * dim;
    if (img_bytes.size() < need)
        raise(ErrorCode::Parse, "mnist: truncated payload in " + images_path + ": need " +
                                    std::to_string(need) + " bytes, have " +
                                    std::to_string(img_bytes.size()) + " (offset " +
                                    std::to_string(img_bytes.size()) + ")");

    const auto lbl_bytes = read_file(labels_path, "mnist");
    const std::uint32_t lbl_magic = read_u32_be(lbl_bytes, 0, labels_path, "mnist");
    if (lbl_magic != kIdxLabelMagic)
        raise(ErrorCode::Parse, "mnist: bad magic " + hex32(lbl_magic) + " in " + labels_path +
                                    " (expected " + hex32(kIdxLabelMagic) + ")");
    const std::uint32_t n_lbl = read_u32_be(lbl_bytes, 4, labels_path, "mnist");
    if (n_lbl != n)
        raise(ErrorCode::Parse, "mnist: image/label count mismatch (" + std::to_string(n) +
                                    " vs " + std::to_string(n_lbl) + ")");
    if (lbl_bytes.size() < 8 + std::size_t(n))
        raise(ErrorCode::Parse, "mnist: truncated labels in " + labels_path + ": need " +
                                    std::to_string(8 + std::size_t(n)) + " bytes, have " +
                                    std::to_string(lbl_bytes.size()));

    LabeledDataset ds;
    ds.source = images_path;
    ds.images = Matrix(n, dim);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* px = img_bytes.data() + 16 + i * dim;
        double* row = ds.images.row(i);
        for (std::size_t j = 0; j < dim; ++j) row[j] = static_cast<double>(px[j]) / 255.0;
        const unsigned char l = lbl_bytes[8 + i];
        if (l >= 10)
            raise(ErrorCode::Parse, "mnist: invalid label " + std::to_string(int(l)) +
                                        " at index " + std::to_string(i));
        ds.labels[i] = static_cast<int>(l);
    }
    return ds;
}

LabeledDataset load_cifar10_binary(const std::vector<std::string>& paths,
                                   bool channel_mean_normalize) {
    if (paths.empty()) raise(ErrorCode::InvalidArgument, "cifar: no input files");

    LabeledDataset ds;
    ds.source = paths.front();
    std::vector<double> pixels;
    std::vector<int> labels;

    for (const auto& path : paths) {
        const auto bytes = read_file(path, "cifar");
        if (bytes.size() % kCifarRecord != 0)
            raise(ErrorCode::Parse, "cifar: " + path + " size " + std::to_string(bytes.size()) +
                                        " is not a multiple of " + std::to_string(kCifarRecord) +
                                        " (truncated at byte " +
                                        std::to_string(bytes.size() -
                                                       bytes.size() % kCifarRecord) +
                                        ")");
        const std::size_t records = bytes.size() / kCifarRecord;
        for (std::size_t r = 0; r < records; ++r) {
            const unsigned char* rec = bytes.data() + r * kCifarRecord;
            if (rec[0] >= 10)
                raise(ErrorCode::Parse, "cifar: invalid label " + std::to_string(int(rec[0])) +
                                            " in record " + std::to_string(r) + " of " + path);
            labels.push_back(static_cast<int>(rec[0]));
            for (std::size_t j = 0; j < kCifarRecord - 1; ++j)
                pixels.push_back(static_cast<double>(rec[1 + j]) / 255.0);
        }
    }

    const std::size_t n = labels.size();
    ds.images = Matrix(n, kCifarRecord - 1);
    std::copy(pixels.begin(), pixels.end(), ds.images.data());
    ds.labels = std::move(labels);

    if (channel_mean_normalize) {
        const std::size_t plane = 1024; // 32x32 per channel
        for (std::size_t ch = 0; ch < 3; ++ch) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* row = ds.images.row(i);
                for (std::size_t j = 0; j < plane; ++j) mean += row[ch * plane + j];
            }
            mean /= static_cast<double>(n * plane);
            for (std::size_t i = 0; i < n; ++i) {
                double* row = ds.images.row(i);
                for (std::size_t j = 0; j < plane; ++j) row[ch * plane + j] -= mean;
            }
        }
    }
    return ds;
}

void write_mnist_idx(const LabeledDataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
    ds.validate();
    std::uint32_t rows, cols;
    if (ds.dim() == 784) {
        rows = 28;
        cols = 28;
    } else {
        rows = 1;
        cols = static_cast<std::uint32_t>(ds.dim());
    }

    std::ofstream img(images_path, std::ios::binary);
    if (!img) raise(ErrorCode::Io, "mnist: cannot open " + images_path + " for writing");
    write_u32_be(img, kIdxImageMagic);
    write_u32_be(img, static_cast<std::uint32_t>(ds.size()));
    write_u32_be(img, rows);
    write_u32_be(img, cols);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* row = ds.images.row(i);
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            const unsigned char b = quantize_pixel(row[j], "mnist write");
            img.write(reinterpret_cast<const char*>(&b), 1);
        }
    }
    if (!img) raise(ErrorCode::Io, "mnist: write failed for " + images_path);

    std::ofstream lbl(labels_path, std::ios::binary);
    if (!lbl) raise(ErrorCode::Io, "mnist: cannot open " + labels_path + " for writing");
    write_u32_be(lbl, kIdxLabelMagic);
    write_u32_be(lbl, static_cast<std::uint32_t>(ds.size()));
    for (int l : ds.labels) {
        const unsigned char b = static_cast<unsigned char>(l);
        lbl.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!lbl) raise(ErrorCode::Io, "mnist: write failed for " + labels_path);
}

void write_cifar10_binary(const LabeledDataset& ds, const std::string& path) {
    ds.validate();
    if (ds.dim() != kCifarRecord - 1)
        raise(ErrorCode::Dimension, "cifar: dataset dim " + std::to_string(ds.dim()) +
                                        " != 3072, cannot write CIFAR records");
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::Io, "cifar: cannot open " + path + " for writing");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const unsigned char l = static_cast<unsigned char>(ds.labels[i]);
        out.write(reinterpret_cast<const char*>(&l), 1);
        const double* row = ds.images.row(i);
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            const unsigned char b = quantize_pixel(row[j], "cifar write");
            out.write(reinterpret_cast<const char*>(&b), 1);
        }
    }
    if (!out) raise(ErrorCode::Io, "cifar: write failed for " + path);
}

bool PermutedTask::is_identity() const {
    for (std::size_t j = 0; j < permutation.size(); ++j)
        if (permutation[j] != j) return false;
    return true;
}

std::vector<std::size_t> PermutedTask::inverse() const {
    std::vector<std::size_t> inv(permutation.size());
    for (std::size_t j = 0; j < permutation.size(); ++j) inv[permutation[j]] = j;
    return inv;
}

LabeledDataset apply_permutation(const LabeledDataset& ds,
                                 const std::vector<std::size_t>& permutation) {
    if (permutation.size() != ds.dim())
        raise(ErrorCode::Dimension, "permute: permutation length " +
                                        std::to_string(permutation.size()) + " != image dim " +
                                        std::to_string(ds.dim()));
    LabeledDataset out;
    out.labels = ds.labels;
    out.source = ds.source;
    out.images = Matrix(ds.size(), ds.dim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* src = ds.images.row(i);
        double* dst = out.images.row(i);
        for (std::size_t j = 0; j < ds.dim(); ++j) dst[j] = src[permutation[j]];
    }
    return out;
}

std::pair<LabeledDataset, PermutedTask> make_permuted_task(const LabeledDataset& base,
                                                           std::size_t task_index,
                                                           std::uint64_t seed,
                                                           bool identity_task0) {
    PermutedTask task;
    task.task_index = task_index;
    task.seed = seed;
    if (task_index == 0 && identity_task0) {
        task.permutation.resize(base.dim());
        std::iota(task.permutation.begin(), task.permutation.end(), 0);
        LabeledDataset copy = base;
        return {std::move(copy), std::move(task)};
    }
    RngStream rng(seed, task_index);
    task.permutation = rng.permutation(base.dim());
    return {apply_permutation(base, task.permutation), std::move(task)};
}

WarmStartSplit split_warmup(const LabeledDataset& full, std::uint64_t seed) {
    if (full.size() < 2)
        raise(ErrorCode::InvalidArgument,
              "split_warmup: need at least 2 samples, got " + std::to_string(full.size()));
    WarmStartSplit split;
    split.seed = seed;
    split.full = full;

    RngStream rng = RngStream(seed).derive(rng_purpose::kSplit);
    auto order = rng.permutation(full.size());
    order.resize(full.size() / 2);
    std::sort(order.begin(), order.end());
    split.warmup_indices = order;
    split.warmup = take(full, order);
    split.warmup.source = full.source + "#warmup";
    return split;
}

std::vector<std::vector<std::size_t>> minibatch_indices(std::size_t n, std::size_t batch_size,
                                                        std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size == 0) raise(ErrorCode::InvalidArgument, "minibatches: batch_size must be >= 1");
    RngStream rng = RngStream(seed).derive(rng_purpose::kShuffle, epoch);
    const auto order = rng.permutation(n);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t stop = std::min(start + batch_size, n);
        batches.emplace_back(order.begin() + start, order.begin() + stop);
    }
    return batches;
}

Minibatch gather(const LabeledDataset& ds, const std::vector<std::size_t>& indices) {
    Minibatch batch;
    batch.images = Matrix(indices.size(), ds.dim());
    batch.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= ds.size())
            raise(ErrorCode::InvalidArgument,
                  "gather: index " + std::to_string(indices[i]) + " out of range");
        std::copy(ds.images.row(indices[i]), ds.images.row(indices[i]) + ds.dim(),
                  batch.images.row(i));
        batch.labels[i] = ds.labels[indices[i]];
    }
    return batch;
}

LabeledDataset take(const LabeledDataset& ds, const std::vector<std::size_t>& indices) {
    Minibatch b = gather(ds, indices);
    LabeledDataset out;
    out.images = std::move(b.images);
    out.labels = std::move(b.labels);
    out.source = ds.source;
    return out;
}

LabeledDataset head(const LabeledDataset& ds, std::size_t n) {
    if (n > ds.size())
        raise(ErrorCode::InvalidArgument, "head: asked for " + std::to_string(n) + " of " +
                                              std::to_string(ds.size()) + " samples");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return take(ds, idx);
}

void SynthConfig::validate() const {
    if (n == 0 || dim == 0) raise(ErrorCode::InvalidArgument, "synth: n and dim must be positive");
    if (num_classes < 2 || num_classes > 10)
        raise(ErrorCode::InvalidArgument, "synth: num_classes must be in [2, 10]");
    if (modes_per_class == 0)
        raise(ErrorCode::InvalidArgument, "synth: modes_per_class must be >= 1");
    if (class_sep < 0.0 || amplitude_jitter < 0.0 || noise < 0.0)
        raise(ErrorCode::InvalidArgument, "synth: spread parameters must be nonnegative");
}

LabeledDataset synthesize_dataset(const SynthConfig& cfg) {
    cfg.validate();
    RngStream rng = RngStream(cfg.seed).derive(rng_purpose::kSynthesis);

    // shared base image plus per-(class, mode) offsets
    std::vector<double> base(cfg.dim);
    for (auto& v : base) v = rng.uniform(0.3, 0.7);
    Matrix offsets(cfg.num_classes * cfg.modes_per_class, cfg.dim);
    for (std::size_t i = 0; i < offsets.size(); ++i)
        offsets.data()[i] = cfg.class_sep * rng.uniform(-1.0, 1.0);

    LabeledDataset ds;
    ds.source = cfg.source;
    ds.images = Matrix(cfg.n, cfg.dim);
    ds.labels.resize(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const std::size_t y = i % cfg.num_classes;
        ds.labels[i] = static_cast<int>(y);
        const std::size_t mode = rng.uniform_index(cfg.modes_per_class);
        const double* off = offsets.row(y * cfg.modes_per_class + mode);
        const double amp = rng.uniform(1.0 - cfg.amplitude_jitter, 1.0 + cfg.amplitude_jitter);
        double* row = ds.images.row(i);
        for (std::size_t j = 0; j < cfg.dim; ++j) {
            double v = base[j] + amp * off[j] + cfg.noise * rng.normal();
            v = std::min(1.0, std::max(0.0, v));
            row[j] = std::lround(v * 255.0) / 255.0; // 8-bit grid: file round-trips are exact
        }
    }
    return ds;
}

} // namespace data
} // namespace plab

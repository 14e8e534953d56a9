#include "plab/feature_dump.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "plab/error.hpp"

namespace plab {
namespace featdump {

namespace {

constexpr const char* kMagic = "plab-features 1";

void put(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
    raise(ErrorCode::Parse, "line " + std::to_string(line) + ": " + msg);
}

class LineReader {
public:
    explicit LineReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) raise(ErrorCode::Io, "cannot open " + path);
    }

    std::string next(const char* what) {
        std::string line;
        if (!std::getline(in_, line)) fail(lineno_ + 1, std::string("missing ") + what);
        ++lineno_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }

    std::size_t lineno() const { return lineno_; }

private:
    std::ifstream in_;
    std::string path_;
    std::size_t lineno_ = 0;
};

std::vector<double> parse_numbers(const std::string& line, std::size_t expected,
                                  std::size_t lineno) {
    std::vector<double> out;
    const char* p = line.c_str();
    char* end = nullptr;
    while (*p) {
        const double v = std::strtod(p, &end);
        if (end == p) fail(lineno, "cannot parse number at '" + std::string(p).substr(0, 12) + "'");
        out.push_back(v);
        p = end;
        while (*p == ' ' || *p == '\t') ++p;
    }
    if (out.size() != expected)
        fail(lineno, "expected " + std::to_string(expected) + " numbers, got " +
                         std::to_string(out.size()));
    return out;
}

} // namespace

void write_feature_dump(const FeatureDump& dump, const std::string& path) {
    dump.batch.validate();
    const std::size_t n = dump.batch.features.rows();
    const std::size_t d = dump.batch.features.cols();
    const std::size_t c = dump.batch.num_classes;
    if (dump.logits.rows() != n || dump.logits.cols() != c)
        raise(ErrorCode::Dimension, "feature dump: logits must be " + std::to_string(n) + "x" +
                                        std::to_string(c));
    if (dump.classifier.rows() != c || dump.classifier.cols() != d)
        raise(ErrorCode::Dimension, "feature dump: classifier must be " + std::to_string(c) +
                                        "x" + std::to_string(d));

    std::string out = kMagic;
    out += "\n";
    out += std::to_string(n) + " " + std::to_string(d) + " " + std::to_string(c) + "\n";
    for (std::size_t i = 0; i < n; ++i) {
        out += std::to_string(dump.batch.labels[i]);
        for (std::size_t j = 0; j < d; ++j) {
            out += " ";
            put(out, dump.batch.features(i, j));
        }
        for (std::size_t j = 0; j < c; ++j) {
            out += " ";
            put(out, dump.logits(i, j));
        }
        out += "\n";
    }
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            if (j) out += " ";
            put(out, dump.classifier(i, j));
        }
        out += "\n";
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) raise(ErrorCode::Io, "cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) raise(ErrorCode::Io, "write failed for " + path);
}

FeatureDump read_feature_dump(const std::string& path) {
    LineReader reader(path);
    if (reader.next("magic header") != kMagic)
        raise(ErrorCode::Parse, path + ": not a feature dump (bad magic line)");

    const std::string dim_line = reader.next("dimension line");
    const auto dims = parse_numbers(dim_line, 3, reader.lineno());
    for (double v : dims)
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
            fail(reader.lineno(), "dimensions must be non-negative integers");
    const auto n = static_cast<std::size_t>(dims[0]);
    const auto d = static_cast<std::size_t>(dims[1]);
    const auto c = static_cast<std::size_t>(dims[2]);

    FeatureDump dump;
    dump.batch.features = Matrix(n, d);
    dump.batch.num_classes = c;
    dump.logits = Matrix(n, c);
    dump.classifier = Matrix(c, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string line = reader.next("sample row");
        const auto row = parse_numbers(line, 1 + d + c, reader.lineno());
        const double label = row[0];
        if (label < 0 || label != static_cast<double>(static_cast<int>(label)) ||
            label >= static_cast<double>(c))
            fail(reader.lineno(), "label out of range");
        dump.batch.labels.push_back(static_cast<int>(label));
        for (std::size_t j = 0; j < d; ++j) dump.batch.features(i, j) = row[1 + j];
        for (std::size_t j = 0; j < c; ++j) dump.logits(i, j) = row[1 + d + j];
    }
    for (std::size_t i = 0; i < c; ++i) {
        const std::string line = reader.next("classifier row");
        const auto row = parse_numbers(line, d, reader.lineno());
        for (std::size_t j = 0; j < d; ++j) dump.classifier(i, j) = row[j];
    }
    dump.batch.validate();
    return dump;
}

} // namespace featdump
} // namespace plab

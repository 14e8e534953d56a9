#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "plab/error.hpp"

namespace plab {
namespace runlog {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// One measurement row. NaN doubles and epochs_used = -1 mean "not recorded"
// and serialize as empty CSV cells.
struct Record {
    std::uint64_t seed = 0;
    std::string protocol;
    int task = 0;
    int epoch = 0;
    double train_acc = kMissing;
    double test_acc = kMissing;
    double nc1 = kMissing;
    double nc2_norm_cv = kMissing;
    double nc2_angle_dev = kMissing;
    double nc3 = kMissing;
    double nc4_mismatch = kMissing;
    long epochs_used = -1;
    double wall_time_ms = kMissing;
    std::string note; // free text, but no commas, quotes, or newlines
};

struct RunLog {
    std::vector<Record> records;
    std::string config_snapshot; // canonical config text, written as a sidecar

    // Strict (seed, task, epoch) ordering plus note/protocol character rules.
    void validate() const;
};

extern const char* const kCsvHeader;

// CSV with a mandatory header, %.17g numerics (lossless for doubles), LF
// endings. from_csv errors name the 1-based line.
std::string to_csv(const RunLog& log);
RunLog from_csv(const std::string& text);

// File variants add a `<path>.config.toml` snapshot sidecar.
void write_csv(const RunLog& log, const std::string& path);
RunLog read_csv(const std::string& path);

// Numeric column access by CSV header name (seed/task/epoch included);
// unknown names are errors. Used by the analysis CLI.
double numeric_field(const Record& r, const std::string& column);

} // namespace runlog
} // namespace plab

#include "plab/runlog.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <tuple>

namespace plab {
namespace runlog {

const char* const kCsvHeader = "seed,protocol,task,epoch,train_acc,test_acc,nc1,nc2_norm_cv,"
                               "nc2_angle_dev,nc3,nc4_mismatch,epochs_used,wall_time_ms,note";

namespace {

constexpr int kNumFields = 14;

void check_text_field(const std::string& s, const char* what) {
    for (char c : s)
        if (c == ',' || c == '"' || c == '\n' || c == '\r')
            raise(ErrorCode::InvalidArgument,
                  std::string(what) + " contains a character reserved by the CSV format: '" +
                      s + "'");
}

std::string cell(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

[[noreturn]] void row_fail(std::size_t line, const std::string& msg) {
    raise(ErrorCode::Parse, "line " + std::to_string(line) + ": " + msg);
}

double parse_cell(const std::string& s, std::size_t line, const char* what) {
    if (s.empty()) return kMissing;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        row_fail(line, std::string("bad ") + what + " value '" + s + "'");
    return v;
}

long parse_long(const std::string& s, std::size_t line, const char* what) {
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size())
        row_fail(line, std::string("bad ") + what + " value '" + s + "'");
    return v;
}

std::vector<std::string> split_row(const std::string& row) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : row) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void RunLog::validate() const {
    const Record* prev = nullptr;
    for (const Record& r : records) {
        check_text_field(r.protocol, "protocol");
        check_text_field(r.note, "note");
        if (prev) {
            const auto a = std::make_tuple(prev->seed, prev->task, prev->epoch);
            const auto b = std::make_tuple(r.seed, r.task, r.epoch);
            if (!(a < b))
                raise(ErrorCode::State,
                      "records out of order: (seed " + std::to_string(r.seed) + ", task " +
                          std::to_string(r.task) + ", epoch " + std::to_string(r.epoch) +
                          ") does not follow (seed " + std::to_string(prev->seed) + ", task " +
                          std::to_string(prev->task) + ", epoch " +
                          std::to_string(prev->epoch) + ")");
        }
        prev = &r;
    }
}

std::string to_csv(const RunLog& log) {
    log.validate();
    std::string out = kCsvHeader;
    out += "\n";
    for (const Record& r : log.records) {
        out += std::to_string(r.seed);
        out += ",";
        out += r.protocol;
        out += ",";
        out += std::to_string(r.task);
        out += ",";
        out += std::to_string(r.epoch);
        out += ",";
        out += cell(r.train_acc);
        out += ",";
        out += cell(r.test_acc);
        out += ",";
        out += cell(r.nc1);
        out += ",";
        out += cell(r.nc2_norm_cv);
        out += ",";
        out += cell(r.nc2_angle_dev);
        out += ",";
        out += cell(r.nc3);
        out += ",";
        out += cell(r.nc4_mismatch);
        out += ",";
        if (r.epochs_used >= 0) out += std::to_string(r.epochs_used);
        out += ",";
        out += cell(r.wall_time_ms);
        out += ",";
        out += r.note;
        out += "\n";
    }
    return out;
}

RunLog from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) raise(ErrorCode::Parse, "line 1: missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader)
        raise(ErrorCode::Parse, "line 1: header mismatch, expected '" +
                                    std::string(kCsvHeader) + "', got '" + line + "'");

    RunLog log;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_row(line);
        if (fields.size() != kNumFields)
            row_fail(lineno, "expected " + std::to_string(kNumFields) + " fields, got " +
                                 std::to_string(fields.size()));
        Record r;
        const long seed = parse_long(fields[0], lineno, "seed");
        if (seed < 0) row_fail(lineno, "bad seed value '" + fields[0] + "'");
        r.seed = static_cast<std::uint64_t>(seed);
        r.protocol = fields[1];
        r.task = static_cast<int>(parse_long(fields[2], lineno, "task"));
        r.epoch = static_cast<int>(parse_long(fields[3], lineno, "epoch"));
        r.train_acc = parse_cell(fields[4], lineno, "train_acc");
        r.test_acc = parse_cell(fields[5], lineno, "test_acc");
        r.nc1 = parse_cell(fields[6], lineno, "nc1");
        r.nc2_norm_cv = parse_cell(fields[7], lineno, "nc2_norm_cv");
        r.nc2_angle_dev = parse_cell(fields[8], lineno, "nc2_angle_dev");
        r.nc3 = parse_cell(fields[9], lineno, "nc3");
        r.nc4_mismatch = parse_cell(fields[10], lineno, "nc4_mismatch");
        r.epochs_used = fields[11].empty() ? -1 : parse_long(fields[11], lineno, "epochs_used");
        r.wall_time_ms = parse_cell(fields[12], lineno, "wall_time_ms");
        r.note = fields[13];
        log.records.push_back(std::move(r));
    }
    log.validate();
    return log;
}

void write_csv(const RunLog& log, const std::string& path) {
    const std::string body = to_csv(log);
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::Io, "cannot open " + path + " for writing");
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) raise(ErrorCode::Io, "write failed for " + path);

    if (!log.config_snapshot.empty()) {
        const std::string side = path + ".config.toml";
        std::ofstream cfg(side, std::ios::binary);
        if (!cfg) raise(ErrorCode::Io, "cannot open " + side + " for writing");
        cfg.write(log.config_snapshot.data(),
                  static_cast<std::streamsize>(log.config_snapshot.size()));
        if (!cfg) raise(ErrorCode::Io, "write failed for " + side);
    }
}

RunLog read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    RunLog log;
    try {
        log = from_csv(ss.str());
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
    std::ifstream cfg(path + ".config.toml", std::ios::binary);
    if (cfg) {
        std::ostringstream cs;
        cs << cfg.rdbuf();
        log.config_snapshot = cs.str();
    }
    return log;
}

double numeric_field(const Record& r, const std::string& column) {
    if (column == "seed") return static_cast<double>(r.seed);
    if (column == "task") return static_cast<double>(r.task);
    if (column == "epoch") return static_cast<double>(r.epoch);
    if (column == "train_acc") return r.train_acc;
    if (column == "test_acc") return r.test_acc;
    if (column == "nc1") return r.nc1;
    if (column == "nc2_norm_cv") return r.nc2_norm_cv;
    if (column == "nc2_angle_dev") return r.nc2_angle_dev;
    if (column == "nc3") return r.nc3;
    if (column == "nc4_mismatch") return r.nc4_mismatch;
    if (column == "epochs_used") return static_cast<double>(r.epochs_used);
    if (column == "wall_time_ms") return r.wall_time_ms;
    raise(ErrorCode::InvalidArgument, "unknown column '" + column + "'");
}

} // namespace runlog
} // namespace plab

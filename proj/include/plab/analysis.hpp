#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plab/error.hpp"

namespace plab {
namespace analysis {

struct Series {
    std::string name;
    std::vector<double> values;
    std::vector<double> index; // optional task/epoch labels; empty or values-sized

    std::size_t size() const { return values.size(); }
    void validate() const; // no NaN, index length consistent
};

struct CorrelationResult {
    double r = 0.0;
    std::size_t n = 0;
    std::size_t window = 0; // 0 = whole-series
};

// Product-moment correlation. Errors on length mismatch, length < 2, or a
// zero-variance ("degenerate") series.
CorrelationResult pearson(const Series& x, const Series& y);

struct WindowedCorrelation {
    std::vector<double> r;          // one per window position
    std::vector<std::uint8_t> valid; // 0 marks a degenerate-window gap
    std::vector<double> start_index; // index label of each window start
    std::size_t window = 0;
    std::size_t stride = 1;
};

// pearson over [i, i+w) for every stride-th i. Degenerate windows become
// gaps, not errors.
WindowedCorrelation sliding_window_corr(const Series& x, const Series& y, std::size_t w,
                                        std::size_t stride = 1);

struct BandSeries {
    Series mean;
    std::vector<double> stddev; // per-position population std across runs
};

// Positionwise mean/std across equal-length runs (the across-seed bands).
BandSeries aggregate(const std::vector<Series>& runs);

// --- plotting -------------------------------------------------------------

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> band; // optional +- half-widths; empty or y-sized
};

// Self-contained SVG line plot, deterministic bytes for fixed input.
void emit_plot(const std::vector<PlotSeries>& series, const std::string& path,
               const std::string& title = "", const std::string& x_label = "",
               const std::string& y_label = "");

} // namespace analysis
} // namespace plab

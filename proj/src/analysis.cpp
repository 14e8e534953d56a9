#include "plab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

namespace plab {
namespace analysis {

void Series::validate() const {
    for (double v : values)
        if (std::isnan(v))
            raise(ErrorCode::InvalidArgument, "series '" + name + "': NaN value admitted");
    if (!index.empty() && index.size() != values.size())
        raise(ErrorCode::Dimension, "series '" + name + "': index length " +
                                        std::to_string(index.size()) + " != " +
                                        std::to_string(values.size()));
}

namespace {

struct Moments {
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    std::size_t n = 0;
};

Moments window_moments(const double* x, const double* y, std::size_t n) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    Moments m;
    m.n = n;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        m.sxx += dx * dx;
        m.syy += dy * dy;
        m.sxy += dx * dy;
    }
    return m;
}

} // namespace

CorrelationResult pearson(const Series& x, const Series& y) {
    x.validate();
    y.validate();
    if (x.size() != y.size())
        raise(ErrorCode::Dimension, "pearson: series lengths differ (" +
                                        std::to_string(x.size()) + " vs " +
                                        std::to_string(y.size()) + ")");
    if (x.size() < 2)
        raise(ErrorCode::InvalidArgument,
              "pearson: need at least 2 points, got " + std::to_string(x.size()));

    const Moments m = window_moments(x.values.data(), y.values.data(), x.size());
    if (m.sxx <= 0.0 || m.syy <= 0.0)
        raise(ErrorCode::Numeric, "pearson: degenerate series (zero variance in '" +
                                      (m.sxx <= 0.0 ? x.name : y.name) + "')");
    CorrelationResult out;
    out.r = m.sxy / std::sqrt(m.sxx * m.syy);
    out.n = m.n;
    return out;
}

WindowedCorrelation sliding_window_corr(const Series& x, const Series& y, std::size_t w,
                                        std::size_t stride) {
    x.validate();
    y.validate();
    if (x.size() != y.size())
        raise(ErrorCode::Dimension, "sliding_window_corr: series lengths differ (" +
                                        std::to_string(x.size()) + " vs " +
                                        std::to_string(y.size()) + ")");
    if (w < 2)
        raise(ErrorCode::InvalidArgument, "sliding_window_corr: window must be >= 2");
    if (stride < 1)
        raise(ErrorCode::InvalidArgument, "sliding_window_corr: stride must be >= 1");
    if (w > x.size())
        raise(ErrorCode::InvalidArgument, "sliding_window_corr: window " + std::to_string(w) +
                                              " exceeds series length " +
                                              std::to_string(x.size()));

    WindowedCorrelation out;
    out.window = w;
    out.stride = stride;
    for (std::size_t start = 0; start + w <= x.size(); start += stride) {
        const Moments m = window_moments(x.values.data() + start, y.values.data() + start, w);
        if (m.sxx <= 0.0 || m.syy <= 0.0) {
            out.r.push_back(0.0);
            out.valid.push_back(0); // gap marker: degenerate window
        } else {
            out.r.push_back(m.sxy / std::sqrt(m.sxx * m.syy));
            out.valid.push_back(1);
        }
        out.start_index.push_back(x.index.empty() ? static_cast<double>(start) : x.index[start]);
    }
    return out;
}

BandSeries aggregate(const std::vector<Series>& runs) {
    if (runs.empty()) raise(ErrorCode::InvalidArgument, "aggregate: no runs");
    const std::size_t len = runs.front().size();
    for (const auto& run : runs) {
        run.validate();
        if (run.size() != len)
            raise(ErrorCode::Dimension, "aggregate: run '" + run.name + "' has length " +
                                            std::to_string(run.size()) + ", expected " +
                                            std::to_string(len));
    }

    BandSeries out;
    out.mean.name = runs.front().name;
    out.mean.index = runs.front().index;
    out.mean.values.resize(len);
    out.stddev.resize(len);
    const double inv = 1.0 / static_cast<double>(runs.size());
    for (std::size_t i = 0; i < len; ++i) {
        double m = 0.0;
        for (const auto& run : runs) m += run.values[i];
        m *= inv;
        double var = 0.0;
        for (const auto& run : runs) {
            const double d = run.values[i] - m;
            var += d * d;
        }
        out.mean.values[i] = m;
        out.stddev[i] = std::sqrt(var * inv);
    }
    return out;
}

// --- SVG ------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

const char* kPalette[6] = {"#1f6fb4", "#d1483a", "#2f8e4c", "#8a56b0", "#b8860b", "#3c8f8f"};

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

void emit_plot(const std::vector<PlotSeries>& series, const std::string& path,
               const std::string& title, const std::string& x_label,
               const std::string& y_label) {
    if (series.empty()) raise(ErrorCode::InvalidArgument, "emit_plot: empty series list");

    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
    bool first = true;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            raise(ErrorCode::Dimension, "emit_plot: series '" + s.label + "' has " +
                                            std::to_string(s.x.size()) + " x values for " +
                                            std::to_string(s.y.size()) + " y values");
        if (!s.band.empty() && s.band.size() != s.y.size())
            raise(ErrorCode::Dimension, "emit_plot: series '" + s.label + "' band length " +
                                            std::to_string(s.band.size()) + " != " +
                                            std::to_string(s.y.size()));
        if (s.x.empty())
            raise(ErrorCode::InvalidArgument, "emit_plot: series '" + s.label + "' is empty");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isnan(s.x[i]) || std::isnan(s.y[i]))
                raise(ErrorCode::InvalidArgument, "emit_plot: NaN in series '" + s.label + "'");
            const double half = s.band.empty() ? 0.0 : std::abs(s.band[i]);
            if (first) {
                xmin = xmax = s.x[i];
                ymin = s.y[i] - half;
                ymax = s.y[i] + half;
                first = false;
            } else {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i] - half);
                ymax = std::max(ymax, s.y[i] + half);
            }
        }
    }
    if (xmax == xmin) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    const double ypad = (ymax == ymin) ? 0.5 : 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double width = 800.0, height = 500.0;
    const double left = 70.0, right = 20.0, top = 40.0, bottom = 50.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
    auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * plot_h; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
           "viewBox=\"0 0 800 500\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"#ffffff\"/>\n";
    if (!title.empty())
        svg += "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"16\">" +
               escape_xml(title) + "</text>\n";

    // axes
    svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top) + "\" x2=\"" + fmt(left) +
           "\" y2=\"" + fmt(top + plot_h) + "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top + plot_h) + "\" x2=\"" +
           fmt(left + plot_w) + "\" y2=\"" + fmt(top + plot_h) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

    // ticks: 5 per axis
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        svg += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + fmt(top + plot_h + 18.0) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               fmt(fx) + "</text>\n";
        svg += "<text x=\"" + fmt(left - 6.0) + "\" y=\"" + fmt(py(fy) + 4.0) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fmt(fy) +
               "</text>\n";
    }
    if (!x_label.empty())
        svg += "<text x=\"" + fmt(left + plot_w / 2.0) + "\" y=\"" + fmt(height - 10.0) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
               escape_xml(x_label) + "</text>\n";
    if (!y_label.empty())
        svg += "<text x=\"18\" y=\"" + fmt(top + plot_h / 2.0) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
               "transform=\"rotate(-90 18 " +
               fmt(top + plot_h / 2.0) + ")\">" + escape_xml(y_label) + "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % 6];

        if (!s.band.empty()) {
            std::string d = "M";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                d += " " + fmt(px(s.x[i])) + " " + fmt(py(s.y[i] + std::abs(s.band[i])));
            for (std::size_t i = s.x.size(); i-- > 0;)
                d += " " + fmt(px(s.x[i])) + " " + fmt(py(s.y[i] - std::abs(s.band[i])));
            d += " Z";
            svg += "<path d=\"" + d + "\" fill=\"" + color + "\" fill-opacity=\"0.15\" "
                   "stroke=\"none\"/>\n";
        }

        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!pts.empty()) pts += " ";
            pts += fmt(px(s.x[i])) + "," + fmt(py(s.y[i]));
        }
        svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";

        const double ly = top + 16.0 + 16.0 * static_cast<double>(si);
        svg += "<line x1=\"" + fmt(left + 10.0) + "\" y1=\"" + fmt(ly - 4.0) + "\" x2=\"" +
               fmt(left + 34.0) + "\" y2=\"" + fmt(ly - 4.0) + "\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";
        svg += "<text x=\"" + fmt(left + 40.0) + "\" y=\"" + fmt(ly) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + escape_xml(s.label) +
               "</text>\n";
    }
    svg += "</svg>\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::Io, "emit_plot: cannot open " + path + " for writing");
    out.write(svg.data(), static_cast<std::streamsize>(svg.size()));
    if (!out) raise(ErrorCode::Io, "emit_plot: write failed for " + path);
}

} // namespace analysis
} // namespace plab

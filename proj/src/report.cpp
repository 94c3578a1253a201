#include "aqr/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "aqr/hash.hpp"

namespace aqr {

std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_long(long v) { return std::to_string(v); }

std::vector<std::string> emit_csv(const CsvReport& report) {
    for (const auto& row : report.rows)
        if (row.size() != report.header.size())
            throw std::invalid_argument("csv rows must match header width");

    std::vector<std::string> warnings;
    std::ofstream out(report.path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write csv: " + report.path);

    auto write_row = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i)
                out << ',';
            out << cells[i];
        }
        out << '\n';
    };

    write_row(report.header);
    std::size_t row_index = 0;
    for (const auto& row : report.rows) {
        std::vector<std::string> cells = row;
        for (auto& cell : cells) {
            if (cell == "nan" || cell == "-nan" || cell == "inf" || cell == "-inf") {
                warnings.push_back("non-finite cell at data row " + std::to_string(row_index) +
                                   " in " + report.path);
                if (cell == "nan" || cell == "-nan")
                    cell.clear();
            }
        }
        write_row(cells);
        ++row_index;
    }
    if (!out)
        throw std::runtime_error("cannot write csv: " + report.path);
    return warnings;
}

namespace {

std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

struct Axis {
    double lo = 0.0, hi = 1.0;
    bool log = false;

    double place(double v, double px_lo, double px_hi) const {
        double t = log ? (std::log(v) - std::log(lo)) / (std::log(hi) - std::log(lo))
                       : (v - lo) / (hi - lo);
        return px_lo + t * (px_hi - px_lo);
    }
};

Axis make_axis(double lo, double hi, bool log) {
    if (lo == hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    if (log) {
        if (!(lo > 0.0))
            throw std::invalid_argument("log axis requires positive values");
        return {lo / 1.25, hi * 1.25, true};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad, false};
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

void svg_frame(std::ostringstream& svg, const PlotSpec& spec, const Axis& ax, const Axis& ay,
               double x0, double x1, double y0, double y1) {
    svg << "<rect x=\"0\" y=\"0\" width=\"" << spec.width << "\" height=\"" << spec.height
        << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << spec.width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << spec.title << "</text>\n";
    svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << spec.height - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << spec.x_label << "</text>\n";
    svg << "<text x=\"14\" y=\"" << (y0 + y1) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 14 " << (y0 + y1) / 2 << ")\">" << spec.y_label
        << "</text>\n";

    for (int i = 0; i <= 4; ++i) {
        const double t = static_cast<double>(i) / 4.0;
        const double px = x0 + t * (x1 - x0);
        const double py = y0 + t * (y1 - y0);
        double vx = ax.log ? std::exp(std::log(ax.lo) + t * (std::log(ax.hi) - std::log(ax.lo)))
                           : ax.lo + t * (ax.hi - ax.lo);
        double vy = ay.log ? std::exp(std::log(ay.lo) + t * (std::log(ay.hi) - std::log(ay.lo)))
                           : ay.lo + t * (ay.hi - ay.lo);
        char labx[32], laby[32];
        std::snprintf(labx, sizeof(labx), "%.3g", vx);
        std::snprintf(laby, sizeof(laby), "%.3g", vy);
        svg << "<line x1=\"" << svg_num(px) << "\" y1=\"" << y0 << "\" x2=\"" << svg_num(px)
            << "\" y2=\"" << y0 + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << svg_num(px) << "\" y=\"" << y0 + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << labx
            << "</text>\n";
        svg << "<line x1=\"" << x0 - 5 << "\" y1=\"" << svg_num(py) << "\" x2=\"" << x0
            << "\" y2=\"" << svg_num(py) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << x0 - 8 << "\" y=\"" << svg_num(py + 3)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << laby
            << "</text>\n";
    }
}

void write_svg(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write svg: " + path);
    out << body;
    if (!out)
        throw std::runtime_error("cannot write svg: " + path);
}

} // namespace

void emit_svg_lines(const std::vector<Series>& series, const PlotSpec& spec,
                    const std::string& path) {
    double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
    double lo_y = lo_x, hi_y = -lo_x;
    for (const auto& s : series) {
        if (s.xs.size() != s.ys.size())
            throw std::invalid_argument("series xs/ys size mismatch");
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            lo_x = std::min(lo_x, s.xs[i]);
            hi_x = std::max(hi_x, s.xs[i]);
            lo_y = std::min(lo_y, s.ys[i]);
            hi_y = std::max(hi_y, s.ys[i]);
        }
    }
    if (!std::isfinite(lo_x) || !std::isfinite(lo_y))
        throw std::invalid_argument("svg plot needs at least one point");

    const Axis ax = make_axis(lo_x, hi_x, spec.log_x);
    const Axis ay = make_axis(lo_y, hi_y, spec.log_y);
    const double x0 = 64, x1 = spec.width - 24;
    const double y0 = spec.height - 48, y1 = 40;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
        << spec.height << "\">\n";
    svg_frame(svg, spec, ax, ay, x0, x1, y0, y1);

    std::size_t color = 0;
    for (const auto& s : series) {
        const std::string stroke =
            s.color.empty() ? kPalette[color % (sizeof(kPalette) / sizeof(kPalette[0]))]
                            : s.color;
        svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (i)
                svg << ' ';
            svg << svg_num(ax.place(s.xs[i], x0, x1)) << ','
                << svg_num(ay.place(s.ys[i], y0, y1));
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << x0 + 10 << "\" y=\"" << y1 + 14 * (color + 1)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << stroke << "\">"
            << s.name << "</text>\n";
        ++color;
    }
    svg << "</svg>\n";
    write_svg(path, svg.str());
}

void emit_svg_boxes(const std::vector<BoxSummary>& boxes, const PlotSpec& spec,
                    const std::string& path) {
    if (boxes.empty())
        throw std::invalid_argument("svg plot needs at least one box");
    double lo_x = boxes.front().x, hi_x = boxes.front().x;
    double lo_y = boxes.front().lo, hi_y = boxes.front().hi;
    for (const auto& b : boxes) {
        lo_x = std::min(lo_x, b.x);
        hi_x = std::max(hi_x, b.x);
        lo_y = std::min(lo_y, b.lo);
        hi_y = std::max(hi_y, b.hi);
    }
    const Axis ax = make_axis(lo_x, hi_x, false);
    const Axis ay = make_axis(lo_y, hi_y, false);
    const double x0 = 64, x1 = spec.width - 24;
    const double y0 = spec.height - 48, y1 = 40;
    const double half = std::max(2.0, (x1 - x0) / (3.0 * static_cast<double>(boxes.size())) / 2);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
        << spec.height << "\">\n";
    svg_frame(svg, spec, ax, ay, x0, x1, y0, y1);

    for (const auto& b : boxes) {
        const double cx = ax.place(b.x, x0, x1);
        const double ylo = ay.place(b.lo, y0, y1);
        const double yq1 = ay.place(b.q1, y0, y1);
        const double ymed = ay.place(b.median, y0, y1);
        const double yq3 = ay.place(b.q3, y0, y1);
        const double yhi = ay.place(b.hi, y0, y1);
        svg << "<line x1=\"" << svg_num(cx) << "\" y1=\"" << svg_num(ylo) << "\" x2=\""
            << svg_num(cx) << "\" y2=\"" << svg_num(yhi) << "\" stroke=\"#444\"/>\n";
        svg << "<rect x=\"" << svg_num(cx - half) << "\" y=\"" << svg_num(yq3) << "\" width=\""
            << svg_num(2 * half) << "\" height=\"" << svg_num(yq1 - yq3)
            << "\" fill=\"#9ecae1\" stroke=\"#1f77b4\"/>\n";
        svg << "<line x1=\"" << svg_num(cx - half) << "\" y1=\"" << svg_num(ymed) << "\" x2=\""
            << svg_num(cx + half) << "\" y2=\"" << svg_num(ymed)
            << "\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
    }
    svg << "</svg>\n";
    write_svg(path, svg.str());
}

void write_manifest(const std::vector<std::string>& files, const std::string& out_dir) {
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& name : files) {
        std::ifstream in(out_dir + "/" + name, std::ios::binary);
        if (!in)
            throw std::runtime_error("manifest: cannot read " + name);
        std::ostringstream buf;
        buf << in.rdbuf();
        entries.emplace_back(name, sha256_hex(buf.str()));
    }
    std::sort(entries.begin(), entries.end());

    CsvReport manifest;
    manifest.header = {"file", "sha256"};
    manifest.path = out_dir + "/manifest.csv";
    for (auto& [name, hash] : entries)
        manifest.rows.push_back({name, hash});
    emit_csv(manifest);
}

} // namespace aqr

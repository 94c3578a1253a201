#pragma once

#include <string>
#include <vector>

namespace aqr {

// Rectangular CSV document. Numeric cells are formatted by the helpers below so
// reruns are byte-identical; NaN renders as an empty cell and is reported back
// as a warning.
struct CsvReport {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string path;
};

// 17 significant digits; enough to reconstruct the double exactly.
std::string csv_double(double v);
std::string csv_long(long v);

// Writes with ',' delimiter, '.' decimal point, LF line endings. Returns
// warnings (one per NaN cell replaced by an empty cell).
std::vector<std::string> emit_csv(const CsvReport& report);

struct Series {
    std::string name;
    std::vector<double> xs;
    std::vector<double> ys;
    std::string color; // css color
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    int width = 880;
    int height = 560;
};

// Self-contained SVG line plot; exactly one <polyline> element per series.
void emit_svg_lines(const std::vector<Series>& series, const PlotSpec& spec,
                    const std::string& path);

// Five-number summary box at horizontal position x.
struct BoxSummary {
    double x = 0.0;
    double lo = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, hi = 0.0;
};

void emit_svg_boxes(const std::vector<BoxSummary>& boxes, const PlotSpec& spec,
                    const std::string& path);

// manifest.csv listing every artifact (relative name, sha256 of contents),
// sorted by name; written last so it covers everything else.
void write_manifest(const std::vector<std::string>& files, const std::string& out_dir);

} // namespace aqr

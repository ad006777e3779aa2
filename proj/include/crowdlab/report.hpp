#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdlab/error.hpp"

namespace crowdlab {

struct CsvLog {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline CsvLog read_csv_log(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), "MissingLogs", "log not found: " + path.string());
    std::ifstream in(path);
    CsvLog log;
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "MissingLogs",
            "empty log: " + path.string());
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) log.columns.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::vector<double> values;
        while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
        require(values.size() == log.columns.size(), "MissingLogs",
                "ragged CSV row in " + path.string());
        log.rows.push_back(std::move(values));
    }
    return log;
}

/// Minimal SVG line chart, one polyline per series.
inline void write_curve_svg(const std::filesystem::path& path, const std::string& title,
                            const std::vector<double>& x, const std::vector<double>& y,
                            const std::string& y_label) {
    require(x.size() == y.size() && !x.empty(), "MissingLogs", "curve needs matching x/y");
    const double width = 640, height = 400, margin = 50;
    double x_min = x.front(), x_max = x.front(), y_min = y.front(), y_max = y.front();
    for (std::size_t i = 0; i < x.size(); ++i) {
        x_min = std::min(x_min, x[i]);
        x_max = std::max(x_max, x[i]);
        y_min = std::min(y_min, y[i]);
        y_max = std::max(y_max, y[i]);
    }
    if (x_max == x_min) x_max = x_min + 1;
    if (y_max == y_min) y_max = y_min + 1;
    auto sx = [&](double v) { return margin + (v - x_min) / (x_max - x_min) * (width - 2 * margin); };
    auto sy = [&](double v) {
        return height - margin - (v - y_min) / (y_max - y_min) * (height - 2 * margin);
    };
    std::ofstream out(path);
    require(out.good(), "MissingFile", "cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    out << "<text x=\"16\" y=\"" << height / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
        << height / 2 << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << height - margin << "\" stroke=\"black\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) out << sx(x[i]) << "," << sy(y[i]) << " ";
    out << "\"/>\n</svg>\n";
}

} // namespace crowdlab

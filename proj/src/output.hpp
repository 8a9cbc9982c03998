#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fracjko::cli {

// 17 significant digits round-trip a double exactly.
std::string fmt17(double x);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> r) { rows.push_back(std::move(r)); }
    std::vector<double> column(const std::string& name) const;  // numeric parse, NaN for blanks
    std::string text() const;
};

CsvTable read_csv(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& text);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t h);

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool dashed = false;
};

struct PlotSpec {
    std::string title, xlabel, ylabel;
    bool logx = false, logy = false;
    std::vector<Series> series;
};

std::string render_svg(const PlotSpec& spec);

}  // namespace fracjko::cli

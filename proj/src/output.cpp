#include "output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fracjko::cli {

std::string fmt17(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<double> CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::out_of_range("csv: no column '" + name + "'");
    const size_t c = size_t(it - header.begin());
    std::vector<double> out;
    for (const auto& r : rows) {
        const std::string& s = c < r.size() ? r[c] : std::string();
        out.push_back(s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::strtod(s.c_str(), nullptr));
    }
    return out;
}

std::string CsvTable::text() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

CsvTable read_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("csv: cannot read " + p.string());
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first)
            t.header = cells, first = false;
        else
            t.rows.push_back(cells);
    }
    return t;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

constexpr double W = 720, H = 460, L = 80, R = 170, T = 40, B = 60;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

struct Axis {
    double lo, hi;
    bool log;
    double map(double v, double a, double b) const {
        const double t = log ? (std::log10(v) - lo) / (hi - lo) : (v - lo) / (hi - lo);
        return a + t * (b - a);
    }
    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            for (double e = std::ceil(lo); e <= hi + 1e-9; e += 1) out.push_back(std::pow(10.0, e));
            if (out.size() < 2) out = {std::pow(10.0, lo), std::pow(10.0, hi)};
        } else {
            const double span = hi - lo;
            const double step0 = std::pow(10.0, std::floor(std::log10(span / 5)));
            double step = step0;
            for (double m : {1.0, 2.0, 5.0, 10.0})
                if (span / (step0 * m) <= 6) {
                    step = step0 * m;
                    break;
                }
            for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) out.push_back(v);
        }
        return out;
    }
};

Axis make_axis(const std::vector<Series>& ss, bool use_x, bool log) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : ss)
        for (double v : use_x ? s.x : s.y) {
            if (!std::isfinite(v) || (log && v <= 0)) continue;
            const double w = log ? std::log10(v) : v;
            lo = std::min(lo, w), hi = std::max(hi, w);
        }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    if (!log) {
        const double pad = 0.04 * (hi - lo);
        lo -= pad, hi += pad;
    }
    return {lo, hi, log};
}

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<')
            o += "&lt;";
        else if (c == '>')
            o += "&gt;";
        else if (c == '&')
            o += "&amp;";
        else
            o += c;
    }
    return o;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
    const Axis ax = make_axis(spec.series, true, spec.logx), ay = make_axis(spec.series, false, spec.logy);
    const double x0 = L, x1 = W - R, y0 = H - B, y1 = T;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(spec.title) << "</text>\n";
    o << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << y0 - y1
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double v : ax.ticks()) {
        const double px = ax.map(v, x0, x1);
        o << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px << "\" y2=\"" << y1 << "\" stroke=\"#ddd\"/>\n";
        o << "<text x=\"" << px << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">" << num(v) << "</text>\n";
    }
    for (double v : ay.ticks()) {
        const double py = ay.map(v, y0, y1);
        o << "<line x1=\"" << x0 << "\" y1=\"" << py << "\" x2=\"" << x1 << "\" y2=\"" << py << "\" stroke=\"#ddd\"/>\n";
        o << "<text x=\"" << x0 - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    }
    o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">" << esc(spec.xlabel) << "</text>\n";
    o << "<text x=\"18\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << (y0 + y1) / 2
      << ")\">" << esc(spec.ylabel) << "</text>\n";
    for (size_t k = 0; k < spec.series.size(); ++k) {
        const auto& s = spec.series[k];
        const char* col = kColors[k % 8];
        o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "")
          << " points=\"";
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if ((spec.logx && s.x[i] <= 0) || (spec.logy && s.y[i] <= 0)) continue;
            o << num(ax.map(s.x[i], x0, x1)) << ',' << num(ay.map(s.y[i], y0, y1)) << ' ';
        }
        o << "\"/>\n";
        const double ly = y1 + 14 + 18 * double(k);
        o << "<line x1=\"" << x1 + 10 << "\" y1=\"" << ly << "\" x2=\"" << x1 + 34 << "\" y2=\"" << ly << "\" stroke=\"" << col
          << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        o << "<text x=\"" << x1 + 40 << "\" y=\"" << ly + 4 << "\">" << esc(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace fracjko::cli

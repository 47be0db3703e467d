#pragma once
// Polarity overlays, precision tables (CSV / markdown) and SVG line charts.

#include <sstream>
#include <string>
#include <vector>

#include "igprobe/harness.hpp"
#include "igprobe/integrated_gradients.hpp"

namespace igprobe {

enum class Polarity { negative, positive, both };

inline const char* to_string(Polarity p) {
    switch (p) {
        case Polarity::negative: return "negative";
        case Polarity::positive: return "positive";
        default: return "both";
    }
}

inline Polarity polarity_from_string(const std::string& s) {
    if (s == "negative") return Polarity::negative;
    if (s == "positive") return Polarity::positive;
    if (s == "both") return Polarity::both;
    throw Error("unknown polarity '" + s + "'");
}

struct OverlaySpec {
    double image_weight = 0.7;
    double ig_weight = 1.5;
    Polarity polarity = Polarity::both;
};

/// Collapses an H x W x C attribution to H x W x 1 by summing channels. The
/// total (and therefore completeness) is unchanged.
inline AttributionMap pixel_attribution(const AttributionMap& att) {
    const auto& s = att.values.shape();
    if (s.size() != 3) throw DimensionError("pixel_attribution expects HxWxC, got " + shape_str(s));
    AttributionMap out = att;
    out.values = Tensor({s[0], s[1], 1});
    for (std::size_t p = 0; p < s[0] * s[1]; ++p) {
        double v = 0.0;
        for (std::size_t c = 0; c < s[2]; ++c) v += att.values[p * s[2] + c];
        out.values[p] = v;
    }
    out.sum = sum(out.values);
    return out;
}

/// out = clamp(image_weight * img + ig_weight * colour, 0, 1) where colour is
/// (|negative|, positive, 0) per pixel, masked by the polarity mode. Polarity
/// maps must be per pixel: H x W or H x W x 1.
inline ImageBuf render_overlay(const ImageBuf& img, const PolarityMaps& pol, const OverlaySpec& spec) {
    if (!std::isfinite(spec.image_weight) || !std::isfinite(spec.ig_weight)) throw Error("overlay weights must be finite");
    const auto& s = pol.negative.shape();
    const bool per_pixel = (s.size() == 2 || (s.size() == 3 && s[2] == 1));
    if (!per_pixel || s[0] != img.height() || s[1] != img.width() || pol.positive.shape() != s)
        throw DimensionError("overlay: polarity maps " + shape_str(s) + " do not align with image " +
                             shape_str(img.shape()));
    const bool neg = spec.polarity != Polarity::positive, pos = spec.polarity != Polarity::negative;
    Tensor out({img.height(), img.width(), 3});
    for (std::size_t p = 0; p < img.height() * img.width(); ++p) {
        const double colour[3] = {neg ? std::abs(pol.negative[p]) : 0.0, pos ? pol.positive[p] : 0.0, 0.0};
        for (std::size_t c = 0; c < 3; ++c)
            out[p * 3 + c] = spec.image_weight * img.tensor()[p * 3 + c] + spec.ig_weight * colour[c];
    }
    return ImageBuf(std::move(out));
}

// ---------------------------------------------------------------------------
// Tables

enum class TableFormat { csv, markdown };

inline std::string emit_table(const PrecisionTable& t, TableFormat fmt) {
    t.validate();
    std::ostringstream os;
    if (fmt == TableFormat::csv) {
        os << "model";
        for (const auto& q : t.qualities) os << ',' << q.label();
        os << '\n';
        for (const auto& r : t.rows) {
            os << csv_field(r.model_name);
            for (double v : r.scores) os << ',' << fixed(v, 4);
            os << '\n';
        }
    } else {
        os << "| model |";
        for (const auto& q : t.qualities) os << ' ' << q.label() << " |";
        os << "\n|---|";
        for (std::size_t i = 0; i < t.qualities.size(); ++i) os << "---:|";
        os << '\n';
        for (const auto& r : t.rows) {
            os << "| " << r.model_name << " |";
            for (double v : r.scores) os << ' ' << fixed(v, 4) << " |";
            os << '\n';
        }
    }
    return os.str();
}

/// Long form: one (model, quality, score) line per cell.
inline std::string emit_table_long(const PrecisionTable& t) {
    t.validate();
    std::ostringstream os;
    os << "model,quality,score\n";
    for (const auto& r : t.rows)
        for (std::size_t k = 0; k < t.qualities.size(); ++k)
            os << csv_field(r.model_name) << ',' << t.qualities[k].token() << ',' << fixed(r.scores[k], 4) << '\n';
    return os.str();
}

namespace detail {

inline QualityLevel quality_from_label(std::string s) {
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    while (!s.empty() && s.back() == ' ') s.pop_back();
    if (s == "Original") return QualityLevel::original();
    if (s.rfind("Quality ", 0) == 0) return QualityLevel::parse(s.substr(8));
    throw Error("unrecognised quality column '" + s + "'");
}

inline std::vector<std::string> split_markdown_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (std::size_t i = 1; i < line.size(); ++i) {
        if (line[i] == '|') {
            while (!cur.empty() && cur.front() == ' ') cur.erase(cur.begin());
            while (!cur.empty() && cur.back() == ' ') cur.pop_back();
            cells.push_back(cur);
            cur.clear();
        } else if (line[i] != '\r') {
            cur.push_back(line[i]);
        }
    }
    return cells;
}

}  // namespace detail

/// Parses the output of emit_table in either format.
inline PrecisionTable parse_table(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    const bool md = !text.empty() && text.front() == '|';
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        if (md) {
            if (line.rfind("|---", 0) == 0) continue;
            rows.push_back(detail::split_markdown_row(line));
        } else {
            rows.push_back(split_csv_line(line));
        }
    }
    if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "model") throw Error("table: missing 'model' header");
    PrecisionTable t;
    for (std::size_t k = 1; k < rows[0].size(); ++k) t.qualities.push_back(detail::quality_from_label(rows[0][k]));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw Error("table row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) + " cells");
        PrecisionRow row{rows[r][0], {}};
        for (std::size_t k = 1; k < rows[r].size(); ++k) {
            try {
                row.scores.push_back(std::stod(rows[r][k]));
            } catch (const std::exception&) {
                throw Error("table row " + std::to_string(r) + ": bad score '" + rows[r][k] + "'");
            }
        }
        t.rows.push_back(std::move(row));
    }
    t.validate();
    return t;
}

// ---------------------------------------------------------------------------
// Charts

struct ChartSpec {
    std::string title = "Precision vs. image quality";
    std::string x_label = "JPEG quality";
    std::string y_label = "Precision";
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace detail

inline constexpr double kChartWidth = 800, kChartHeight = 500;
inline constexpr double kPlotLeft = 70, kPlotRight = 620, kPlotTop = 60, kPlotBottom = 430;

/// Y coordinate of a precision value on the chart.
inline double chart_y(double score) { return kPlotBottom - score * (kPlotBottom - kPlotTop); }

/// Standalone SVG 1.1: one polyline per model, qualities evenly spaced on x in
/// table order, precision in [0, 1] on y with gridlines every 0.25.
inline std::string emit_chart_svg(const PrecisionTable& t, const ChartSpec& spec = {}) {
    t.validate();
    if (t.rows.empty()) throw Error("chart needs at least one series");
    if (t.qualities.size() < 2) throw Error("chart: need >=2 points");
    static const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                     "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    const auto n = t.qualities.size();
    auto x_at = [&](std::size_t k) { return kPlotLeft + (kPlotRight - kPlotLeft) * static_cast<double>(k) / static_cast<double>(n - 1); };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n"
       << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n"
       << "<text x=\"400\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">"
       << detail::xml_escape(spec.title) << "</text>\n";
    for (int g = 0; g <= 4; ++g) {
        const double v = g * 0.25, y = chart_y(v);
        os << "<line x1=\"" << fixed(kPlotLeft, 2) << "\" y1=\"" << fixed(y, 2) << "\" x2=\"" << fixed(kPlotRight, 2)
           << "\" y2=\"" << fixed(y, 2) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
           << "<text x=\"" << fixed(kPlotLeft - 8, 2) << "\" y=\"" << fixed(y + 4, 2)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << fixed(v, 2) << "</text>\n";
    }
    for (std::size_t k = 0; k < n; ++k)
        os << "<text x=\"" << fixed(x_at(k), 2) << "\" y=\"" << fixed(kPlotBottom + 20, 2)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
           << detail::xml_escape(t.qualities[k].label()) << "</text>\n";
    os << "<text x=\"" << fixed((kPlotLeft + kPlotRight) / 2, 2) << "\" y=\"480\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"14\">" << detail::xml_escape(spec.x_label) << "</text>\n"
       << "<text x=\"20\" y=\"" << fixed((kPlotTop + kPlotBottom) / 2, 2) << "\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"14\" transform=\"rotate(-90 20 "
       << fixed((kPlotTop + kPlotBottom) / 2, 2) << ")\">" << detail::xml_escape(spec.y_label) << "</text>\n";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const char* colour = kColours[r % std::size(kColours)];
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < n; ++k)
            os << (k ? " " : "") << fixed(x_at(k), 2) << ',' << fixed(chart_y(std::clamp(t.rows[r].scores[k], 0.0, 1.0)), 2);
        os << "\"/>\n";
        const double ly = kPlotTop + 20.0 * static_cast<double>(r);
        os << "<rect x=\"640\" y=\"" << fixed(ly - 9, 2) << "\" width=\"12\" height=\"12\" fill=\"" << colour << "\"/>\n"
           << "<text x=\"658\" y=\"" << fixed(ly + 2, 2) << "\" font-family=\"sans-serif\" font-size=\"12\">"
           << detail::xml_escape(t.rows[r].model_name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace igprobe

#include "lidbench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "lidbench/error.hpp"
#include "lidbench/hash.hpp"

namespace lidbench {

namespace {

std::string fixed(double v, int precision = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

std::string xml_escape(std::string_view s) {
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

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

struct Svg {
    std::string body;
    int width;
    int height;

    Svg(int w, int h) : width(w), height(h) {}

    void text(double x, double y, std::string_view s, int size = 12, std::string_view anchor = "middle",
              std::string_view fill = "#222") {
        body += "<text x=\"" + fixed(x, 1) + "\" y=\"" + fixed(y, 1) + "\" font-size=\"" + std::to_string(size) +
                "\" text-anchor=\"" + std::string(anchor) + "\" fill=\"" + std::string(fill) + "\">" +
                xml_escape(s) + "</text>\n";
    }
    void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = "#fff") {
        body += "<rect x=\"" + fixed(x, 1) + "\" y=\"" + fixed(y, 1) + "\" width=\"" + fixed(w, 1) +
                "\" height=\"" + fixed(h, 1) + "\" fill=\"" + std::string(fill) + "\" stroke=\"" +
                std::string(stroke) + "\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2, std::string_view stroke, double w = 1.0) {
        body += "<line x1=\"" + fixed(x1, 1) + "\" y1=\"" + fixed(y1, 1) + "\" x2=\"" + fixed(x2, 1) +
                "\" y2=\"" + fixed(y2, 1) + "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" +
                fixed(w, 1) + "\"/>\n";
    }
    void circle(double x, double y, double r, std::string_view fill) {
        body += "<circle cx=\"" + fixed(x, 1) + "\" cy=\"" + fixed(y, 1) + "\" r=\"" + fixed(r, 1) + "\" fill=\"" +
                std::string(fill) + "\"/>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke) {
        body += "<polyline fill=\"none\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) body += ' ';
            body += fixed(pts[i].first, 1) + "," + fixed(pts[i].second, 1);
        }
        body += "\"/>\n";
    }
    std::string str() const {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
               std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " +
               std::to_string(height) + "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n" +
               body + "</svg>\n";
    }
};

// Light-to-dark blue ramp over 0..100 percent.
std::string ramp(double pct) {
    const double t = std::clamp(pct / 100.0, 0.0, 1.0);
    const auto mix = [t](int a, int b) { return static_cast<int>(a + (b - a) * t + 0.5); };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(0xf7, 0x08), mix(0xfb, 0x30), mix(0xff, 0x6b));
    return buf;
}

std::string_view series_color(Encoding e) {
    switch (e) {
        case Encoding::incident: return "#1f77b4";
        case Encoding::adjacency: return "#ff7f0e";
        case Encoding::expert: return "#2ca02c";
    }
    return "#000";
}

// Axis frame with horizontal grid lines every 20 percent.
void percent_axis(Svg& svg, double x0, double y0, double w, double h) {
    for (int v = 0; v <= 100; v += 20) {
        const double y = y0 + h - h * v / 100.0;
        svg.line(x0, y, x0 + w, y, "#ddd");
        svg.text(x0 - 6, y + 4, std::to_string(v), 11, "end");
    }
    svg.line(x0, y0, x0, y0 + h, "#444");
    svg.line(x0, y0 + h, x0 + w, y0 + h, "#444");
}

}  // namespace

std::string cells_csv(std::span<const AccuracyCell> cells) {
    std::string out = "task,encoding,cell,n,correct,accuracy,stddev,degenerate,degeneration_rate\n";
    for (const auto& c : cells) {
        out += std::string(to_string(c.task)) + "," + std::string(to_string(c.encoding)) + "," + csv_field(c.cell) +
               "," + std::to_string(c.n) + "," + std::to_string(c.correct) + "," + fixed(c.accuracy) + "," +
               fixed(c.stddev) + "," + std::to_string(c.degenerate) + "," + fixed(c.degeneration_rate) + "\n";
    }
    return out;
}

std::string cells_jsonl(std::span<const AccuracyCell> cells) {
    std::string out;
    for (const auto& c : cells) out += nlohmann::json(c).dump() + "\n";
    return out;
}

std::string degeneration_csv(std::span<const DegenerationSummary> rows) {
    std::string out = "task,encoding,n";
    for (auto d : kAllDegenerations) out += "," + std::string(to_string(d));
    out += ",rate\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.task)) + "," + std::string(to_string(r.encoding)) + "," + std::to_string(r.n);
        for (auto n : r.counts) out += "," + std::to_string(n);
        out += "," + fixed(r.rate) + "\n";
    }
    return out;
}

std::string heatmap_svg(std::span<const AccuracyCell> cells) {
    if (cells.empty()) throw ParameterError("heatmap needs cells");
    const TaskKind task = cells.front().task;
    const double left = 120, top = 60, cw = 110, ch = 70;
    Svg svg(static_cast<int>(left + 3 * cw + 30), static_cast<int>(top + 3 * ch + 60));
    svg.text(left + 1.5 * cw, 28,
             std::string(to_string(task)) + " / " + std::string(to_string(cells.front().encoding)), 15);
    const auto row_label = [&](int r) {
        return task == TaskKind::similarity ? std::string(to_string(kAllDistanceLabels[r]))
                                            : "p1 = " + std::to_string(r);
    };
    const auto col_label = [&](int c) {
        return task == TaskKind::similarity ? std::string(to_string(kAllDistanceLabels[c]))
                                            : "p2 = " + std::to_string(c + 3);
    };
    for (int i = 0; i < 3; ++i) {
        svg.text(left - 10, top + ch * i + ch / 2 + 4, row_label(i), 12, "end");
        svg.text(left + cw * i + cw / 2, top + 3 * ch + 20, col_label(i), 12);
    }
    svg.text(left + 1.5 * cw, top + 3 * ch + 44,
             task == TaskKind::similarity ? "distance (source, target 2)" : "second block position", 12);
    for (const auto& c : cells) {
        if (c.task != task || c.rank < 0 || c.rank > 8) throw ParameterError("heatmap cells must share a 3x3 task");
        const int r = c.rank / 3;
        const int k = c.rank % 3;
        const double x = left + cw * k;
        const double y = top + ch * r;
        svg.rect(x, y, cw, ch, ramp(c.accuracy));
        svg.text(x + cw / 2, y + ch / 2 + 5, fixed(c.accuracy) + " ± " + fixed(c.stddev), 13, "middle",
                 c.accuracy > 55.0 ? "#fff" : "#111");
    }
    return svg.str();
}

std::string placement_chart_svg(std::span<const AccuracyCell> cells) {
    const double x0 = 60, y0 = 40, w = 360, h = 220;
    Svg svg(static_cast<int>(x0 + w + 130), static_cast<int>(y0 + h + 60));
    svg.text(x0 + w / 2, 24, "edge_existence accuracy by placement", 15);
    percent_axis(svg, x0, y0, w, h);
    for (std::size_t i = 0; i < std::size(kAllPlacements); ++i) {
        svg.text(x0 + w * (static_cast<double>(i) + 0.5) / 3.0, y0 + h + 20, to_string(kAllPlacements[i]), 12);
    }
    std::map<int, std::vector<const AccuracyCell*>> series;
    for (const auto& c : cells) {
        if (c.task == TaskKind::edge_existence) series[static_cast<int>(c.encoding)].push_back(&c);
    }
    int legend = 0;
    for (const auto& [enc, members] : series) {
        const auto color = series_color(static_cast<Encoding>(enc));
        std::vector<std::pair<double, double>> pts;
        for (const auto* c : members) {
            const double x = x0 + w * (c->rank + 0.5) / 3.0;
            const auto y_of = [&](double v) { return y0 + h - h * std::clamp(v, 0.0, 100.0) / 100.0; };
            pts.emplace_back(x, y_of(c->accuracy));
            svg.line(x, y_of(c->accuracy - c->stddev), x, y_of(c->accuracy + c->stddev), color);
            svg.circle(x, y_of(c->accuracy), 4, color);
        }
        svg.polyline(pts, color);
        const double ly = y0 + 10 + 20 * legend++;
        svg.line(x0 + w + 20, ly, x0 + w + 40, ly, color, 2);
        svg.text(x0 + w + 46, ly + 4, to_string(static_cast<Encoding>(enc)), 12, "start");
    }
    return svg.str();
}

std::string fit_curves_svg(const FitResult& fit) {
    const double pw = 300, ph = 220, top = 50, gap = 90, left = 60;
    Svg svg(static_cast<int>(left + 2 * pw + gap + 30), static_cast<int>(top + ph + 60));
    svg.text(left + pw + gap / 2, 24, "fitted curves / " + std::string(to_string(fit.encoding)), 15);

    percent_axis(svg, left, top, pw, ph);
    const auto gx = [&](double p) { return left + pw * std::clamp(p, 0.0, 1.0); };
    const auto gy = [&](double v) { return top + ph - ph * std::clamp(v, 0.0, 100.0) / 100.0; };
    std::vector<std::pair<double, double>> pts{{gx(0.0), gy(fit.G_hat(0.0))}};
    for (const auto& [x, y] : fit.G_hat.knots()) pts.emplace_back(gx(x), gy(y));
    pts.emplace_back(gx(1.0), gy(fit.G_hat(1.0)));
    svg.polyline(pts, "#1f77b4");
    for (const auto& [x, y] : fit.G_hat.knots()) svg.circle(gx(x), gy(y), 4, "#1f77b4");
    for (int i = 0; i <= 4; ++i) svg.text(gx(i / 4.0), top + ph + 18, fixed(i / 4.0), 11);
    svg.text(left + pw / 2, top + ph + 40, "position (normalized); G accuracy %", 12);

    const double hx0 = left + pw + gap;
    double hmax = 1.0;
    double dmax = 0.0;
    for (const auto& c : fit.H_hat.classes) {
        hmax = std::max(hmax, c.H + c.standard_error.value_or(0.0));
        dmax = std::max(dmax, c.distance);
    }
    hmax *= 1.1;
    dmax = dmax > 0.0 ? dmax * 1.1 : 1.0;
    const auto hx = [&](double d) { return hx0 + pw * d / dmax; };
    const auto hy = [&](double v) { return top + ph - ph * std::clamp(v, 0.0, hmax) / hmax; };
    for (int i = 0; i <= 4; ++i) {
        const double v = hmax * i / 4.0;
        svg.line(hx0, hy(v), hx0 + pw, hy(v), "#ddd");
        svg.text(hx0 - 6, hy(v) + 4, fixed(v), 11, "end");
        svg.text(hx(dmax * i / 4.0), top + ph + 18, fixed(dmax * i / 4.0), 11);
    }
    svg.line(hx0, top, hx0, top + ph, "#444");
    svg.line(hx0, top + ph, hx0 + pw, top + ph, "#444");
    std::vector<std::pair<double, double>> hp;
    for (const auto& c : fit.H_hat.classes) {
        hp.emplace_back(hx(c.distance), hy(c.H));
        if (c.standard_error) {
            svg.line(hx(c.distance), hy(c.H - *c.standard_error), hx(c.distance), hy(c.H + *c.standard_error),
                     "#d62728");
        }
        svg.circle(hx(c.distance), hy(c.H), 4, "#d62728");
    }
    if (hp.size() > 1) svg.polyline(hp, "#d62728");
    svg.text(hx0 + pw / 2, top + ph + 40, "distance (normalized); H multiplier", 12);
    return svg.str();
}

std::vector<std::string> emit_report(std::span<const AccuracyCell> cells,
                                     std::span<const DegenerationSummary> degeneration,
                                     std::span<const FitResult> fits, const nlohmann::json& metadata,
                                     const std::filesystem::path& dir) {
    if (cells.empty()) throw ParameterError("report needs at least one cell");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create report directory " + dir.string() + ": " + ec.message());

    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("cells.csv", cells_csv(cells));
    files.emplace_back("cells.jsonl", cells_jsonl(cells));
    files.emplace_back("degeneration.csv", degeneration_csv(degeneration));

    std::map<std::pair<int, int>, std::vector<AccuracyCell>> grids;
    bool has_edge = false;
    for (const auto& c : cells) {
        if (c.task == TaskKind::edge_existence) {
            has_edge = true;
        } else {
            grids[{static_cast<int>(c.task), static_cast<int>(c.encoding)}].push_back(c);
        }
    }
    for (const auto& [key, group] : grids) {
        files.emplace_back("heatmap-" + std::string(to_string(group.front().task)) + "-" +
                               std::string(to_string(group.front().encoding)) + ".svg",
                           heatmap_svg(group));
    }
    if (has_edge) files.emplace_back("linechart-edge_existence.svg", placement_chart_svg(cells));
    for (const auto& f : fits) {
        files.emplace_back("fit-curves-" + std::string(to_string(f.encoding)) + ".svg", fit_curves_svg(f));
    }

    nlohmann::json overall = nlohmann::json::array();
    for (const auto& d : degeneration) {
        std::size_t n = 0, correct = 0;
        for (const auto& c : cells) {
            if (c.task == d.task && c.encoding == d.encoding) {
                n += c.n;
                correct += c.correct;
            }
        }
        overall.push_back({{"task", to_string(d.task)},
                           {"encoding", to_string(d.encoding)},
                           {"n", n},
                           {"accuracy", n ? 100.0 * static_cast<double>(correct) / static_cast<double>(n) : 0.0},
                           {"degeneration_rate", d.rate}});
    }
    nlohmann::json fit_summary = nlohmann::json::array();
    for (const auto& f : fits) {
        fit_summary.push_back({{"encoding", to_string(f.encoding)},
                               {"gamma_hat", f.gamma_hat},
                               {"rmse_test_middle_only", f.rmse_test_middle_only},
                               {"rmse_test_distance", f.rmse_test_distance},
                               {"noise_floor", f.noise_floor}});
    }
    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& [name, content] : files) hashes[name] = sha256_hex(content);
    const nlohmann::json summary = {{"format_version", kReportFormatVersion},
                                    {"run", metadata},
                                    {"cell_count", cells.size()},
                                    {"overall", overall},
                                    {"fits", fit_summary},
                                    {"files", hashes}};
    files.emplace_back("summary.json", summary.dump(2) + "\n");
    hashes["summary.json"] = sha256_hex(files.back().second);
    const nlohmann::json manifest = {{"format_version", kReportFormatVersion}, {"files", hashes}};
    files.emplace_back("manifest.json", manifest.dump(2) + "\n");

    std::vector<std::string> names;
    for (const auto& [name, content] : files) {
        write_file_atomic(dir / name, content);
        names.push_back(name);
    }
    return names;
}

}  // namespace lidbench

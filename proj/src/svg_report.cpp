#include "biaslens/svg_report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "biaslens/error.hpp"

namespace biaslens::report {

namespace {

constexpr double kPlotH = 240.0;
constexpr double kMarginL = 56.0;
constexpr double kMarginR = 24.0;
constexpr double kMarginT = 36.0;
constexpr double kMarginB = 96.0;
constexpr double kGroupW = 56.0;
constexpr double kBarW = 30.0;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_chart_svg(const audit::AuditReport& report) {
    if (report.conditions.empty())
        throw ParameterError("cannot chart a report with no conditions");

    const size_t n = report.conditions.size();
    const double width = kMarginL + kGroupW * static_cast<double>(n) + kMarginR;
    const double height = kMarginT + kPlotH + kMarginB;
    const double base_y = kMarginT + kPlotH;
    const auto y_of = [&](double accuracy) { return base_y - accuracy * kPlotH; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
        << fmt(width) << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 "
        << fmt(width) << " " << fmt(height) << "\">\n";
    svg << "<title>" << escape(report.dataset_id)
        << " : per-condition accuracy vs chance</title>\n";
    svg << "<text x=\"" << fmt(kMarginL) << "\" y=\"" << fmt(kMarginT - 14.0)
        << "\" font-family=\"sans-serif\" font-size=\"13\">" << escape(report.dataset_id)
        << " : mean test accuracy per condition (ticks = seeds, dashes = chance)"
        << "</text>\n";

    // Axes.
    svg << "<line x1=\"" << fmt(kMarginL) << "\" y1=\"" << fmt(kMarginT)
        << "\" x2=\"" << fmt(kMarginL) << "\" y2=\"" << fmt(base_y)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<line x1=\"" << fmt(kMarginL) << "\" y1=\"" << fmt(base_y) << "\" x2=\""
        << fmt(width - kMarginR) << "\" y2=\"" << fmt(base_y)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double acc = t * 0.25;
        svg << "<line x1=\"" << fmt(kMarginL - 4.0) << "\" y1=\"" << fmt(y_of(acc))
            << "\" x2=\"" << fmt(kMarginL) << "\" y2=\"" << fmt(y_of(acc))
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << fmt(kMarginL - 8.0) << "\" y=\"" << fmt(y_of(acc) + 4.0)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
            << fmt(acc) << "</text>\n";
    }
    svg << "<text x=\"" << fmt(12.0) << "\" y=\"" << fmt(kMarginT + kPlotH / 2.0)
        << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 12 "
        << fmt(kMarginT + kPlotH / 2.0) << ")\" text-anchor=\"middle\">accuracy</text>\n";

    // Bars (exactly one rect per condition) and per-seed ticks.
    for (size_t i = 0; i < n; ++i) {
        const auto& c = report.conditions[i];
        const double gx = kMarginL + kGroupW * static_cast<double>(i);
        const double bx = gx + (kGroupW - kBarW) / 2.0;
        const double acc = c.failed ? 0.0 : c.mean_accuracy;
        svg << "<rect x=\"" << fmt(bx) << "\" y=\"" << fmt(y_of(acc)) << "\" width=\""
            << fmt(kBarW) << "\" height=\"" << fmt(acc * kPlotH)
            << "\" fill=\"" << (c.flagged ? "#c0504d" : "#4f81bd") << "\"/>\n";
        if (!c.failed) {
            for (const auto& s : c.seeds) {
                svg << "<line x1=\"" << fmt(bx - 4.0) << "\" y1=\""
                    << fmt(y_of(s.accuracy)) << "\" x2=\"" << fmt(bx + kBarW + 4.0)
                    << "\" y2=\"" << fmt(y_of(s.accuracy))
                    << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
            }
        }
        const double lx = gx + kGroupW / 2.0;
        const double ly = base_y + 12.0;
        svg << "<text x=\"" << fmt(lx) << "\" y=\"" << fmt(ly)
            << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\" "
               "transform=\"rotate(-45 "
            << fmt(lx) << " " << fmt(ly) << ")\">" << escape(c.name)
            << (c.failed ? " (failed)" : "") << "</text>\n";
    }

    // Chance baseline (every condition shares the dataset's chance level).
    const double chance = report.conditions.front().chance;
    svg << "<line x1=\"" << fmt(kMarginL) << "\" y1=\"" << fmt(y_of(chance))
        << "\" x2=\"" << fmt(width - kMarginR) << "\" y2=\"" << fmt(y_of(chance))
        << "\" stroke=\"#707070\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n";
    svg << "<text x=\"" << fmt(width - kMarginR) << "\" y=\""
        << fmt(y_of(chance) - 4.0)
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">chance "
        << fmt(chance) << "</text>\n";

    svg << "</svg>\n";
    return svg.str();
}

void render_chart(const audit::AuditReport& report,
                  const std::filesystem::path& out_path) {
    const std::string svg = render_chart_svg(report);
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw IoError("cannot write " + out_path.string());
    f << svg;
}

}  // namespace biaslens::report

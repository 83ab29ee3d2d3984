#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "zsseg/metrics.hpp"
#include "zsseg/training.hpp"

namespace zsseg {

namespace svg {

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
    return colors[i % 7];
}

inline std::string num(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

inline std::string header(int w, int h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
           std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
           "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string text(Real x, Real y, const std::string& s, const char* anchor = "start", int size = 11) {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\" font-size=\"" +
           std::to_string(size) + "\">" + escape(s) + "</text>\n";
}

}  // namespace svg

// One small panel per loss term against the step index.
inline std::string loss_curves_svg(const std::vector<HistoryRow>& rows, const std::string& title) {
    const char* names[] = {"L_Cross", "L_Seen", "L_Bg", "L_Adv", "L_Seg", "L_D"};
    const auto value = [](const LossBundle& l, int k) {
        const Real v[] = {l.cross, l.seen, l.bg, l.adv, l.seg, l.disc};
        return v[k];
    };
    const int pw = 260, ph = 170, cols = 3, margin = 40, top = 30;
    const int width = cols * pw + 20, height = top + 2 * ph + 10;
    std::ostringstream os;
    os << svg::header(width, height) << svg::text(width / 2.0, 18, title, "middle", 13);
    for (int k = 0; k < 6; ++k) {
        const Real ox = 10 + (k % cols) * pw, oy = top + (k / cols) * ph;
        const Real x0 = ox + margin, x1 = ox + pw - 10, y0 = oy + ph - 25, y1 = oy + 18;
        Real lo = 0.0, hi = 0.0;
        if (!rows.empty()) {
            lo = hi = value(rows.front().loss, k);
            for (const auto& r : rows) {
                lo = std::min(lo, value(r.loss, k));
                hi = std::max(hi, value(r.loss, k));
            }
        }
        if (hi - lo < 1e-12) {
            hi += 0.5;
            lo -= 0.5;
        }
        os << "<rect x=\"" << svg::num(x0) << "\" y=\"" << svg::num(y1) << "\" width=\"" << svg::num(x1 - x0)
           << "\" height=\"" << svg::num(y0 - y1) << "\" fill=\"none\" stroke=\"#999\"/>\n";
        os << svg::text((x0 + x1) / 2, oy + 12, names[k], "middle", 12);
        os << svg::text(x0 - 3, y1 + 8, svg::tick(hi), "end", 9) << svg::text(x0 - 3, y0, svg::tick(lo), "end", 9);
        os << svg::text(x1, y0 + 12, std::to_string(rows.empty() ? 0 : rows.back().step), "end", 9);
        if (rows.empty()) continue;
        const Real n = std::max<Real>(1.0, static_cast<Real>(rows.size() - 1));
        os << "<polyline fill=\"none\" stroke=\"" << svg::palette(k) << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Real x = x0 + (x1 - x0) * static_cast<Real>(i) / n;
            const Real y = y0 - (y0 - y1) * (value(rows[i].loss, k) - lo) / (hi - lo);
            os << svg::num(x) << ',' << svg::num(y) << ' ';
        }
        os << "\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// Grouped bars: one group per report, one bar per structure class.
inline std::string dice_bars_svg(const std::vector<MetricReport>& reports, const std::string& title) {
    const std::vector<std::string> names =
        reports.empty() ? std::vector<std::string>{} : reports.front().class_names;
    const int classes = std::max(1, static_cast<int>(names.size()) - 1);
    const int group_w = classes * 14 + 16;
    const int left = 50, top = 30, plot_h = 220;
    const int width = left + std::max<int>(1, static_cast<int>(reports.size())) * group_w + 140;
    const int height = top + plot_h + 60;
    const Real y0 = top + plot_h;
    std::ostringstream os;
    os << svg::header(width, height) << svg::text(width / 2.0, 18, title, "middle", 13);
    for (int t = 0; t <= 4; ++t) {
        const Real y = y0 - plot_h * t / 4.0;
        os << "<line x1=\"" << left << "\" x2=\"" << width - 140 << "\" y1=\"" << svg::num(y) << "\" y2=\""
           << svg::num(y) << "\" stroke=\"#ddd\"/>\n"
           << svg::text(left - 4, y + 4, svg::tick(t * 0.25), "end", 9);
    }
    for (std::size_t g = 0; g < reports.size(); ++g) {
        const MetricReport& r = reports[g];
        const Real gx = left + static_cast<Real>(g) * group_w + 8;
        for (int c = 1; c < r.num_classes(); ++c) {
            const Real d = std::isnan(r.dice[c]) ? 0.0 : std::clamp<Real>(r.dice[c], 0.0, 1.0);
            const Real h = plot_h * d;
            os << "<rect x=\"" << svg::num(gx + (c - 1) * 14) << "\" y=\"" << svg::num(y0 - h) << "\" width=\"12\" height=\""
               << svg::num(h) << "\" fill=\"" << svg::palette(c - 1) << "\"" << (r.is_unseen(c) ? " stroke=\"black\" stroke-width=\"1.5\"" : "")
               << "/>\n";
        }
        const std::string label = r.setting.empty() ? r.tag : r.setting;
        os << svg::text(gx + classes * 7.0, y0 + 14, label, "middle", 10);
        os << svg::text(gx + classes * 7.0, y0 + 27, r.unseen.empty() ? "-" : r.unseen_label(), "middle", 8);
    }
    for (int c = 1; c < static_cast<int>(names.size()); ++c) {
        const Real ly = top + 10 + (c - 1) * 16;
        os << "<rect x=\"" << width - 130 << "\" y=\"" << svg::num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
           << svg::palette(c - 1) << "\"/>\n"
           << svg::text(width - 115, ly, names[c]);
    }
    os << svg::text(width - 130, top + 10 + classes * 16 + 6, "outlined = unseen", "start", 9);
    os << "</svg>\n";
    return os.str();
}

}  // namespace zsseg

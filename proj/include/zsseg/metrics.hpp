#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsseg/datagen.hpp"
#include "zsseg/training.hpp"

namespace zsseg {

using Mask = std::vector<std::uint8_t>;

inline Mask class_mask(const std::vector<std::uint8_t>& labels, int c) {
    Mask m(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == c ? 1 : 0;
    return m;
}

struct OverlapCounts {
    std::uint64_t intersection = 0;
    std::uint64_t pred = 0;
    std::uint64_t truth = 0;
};

inline OverlapCounts overlap(const Mask& pred, const Mask& gt) {
    if (pred.size() != gt.size()) throw ShapeError("dice: mask size mismatch");
    OverlapCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        c.pred += pred[i] != 0;
        c.truth += gt[i] != 0;
        c.intersection += (pred[i] != 0) && (gt[i] != 0);
    }
    return c;
}

// Both empty -> 1, exactly one empty -> 0.
inline Real dice_from_counts(const OverlapCounts& c) {
    if (c.pred + c.truth == 0) return 1.0;
    return 2.0 * static_cast<Real>(c.intersection) / static_cast<Real>(c.pred + c.truth);
}

inline Real dice(const Mask& pred, const Mask& gt) { return dice_from_counts(overlap(pred, gt)); }

// Mask pixels with a 4-neighbour outside the mask (the image border counts as outside).
inline Mask boundary(const Mask& m, int height, int width) {
    if (m.size() != static_cast<std::size_t>(height) * width) throw ShapeError("boundary: mask size mismatch");
    Mask b(m.size(), 0);
    const auto at = [&](int y, int x) {
        return y >= 0 && y < height && x >= 0 && x < width && m[static_cast<std::size_t>(y) * width + x];
    };
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (at(y, x) && !(at(y - 1, x) && at(y + 1, x) && at(y, x - 1) && at(y, x + 1)))
                b[static_cast<std::size_t>(y) * width + x] = 1;
    return b;
}

namespace detail {

// 1-D squared distance transform (lower envelope of parabolas) with the
// sample positions scaled by `step`.
inline void edt_1d(const std::vector<Real>& f, std::vector<Real>& d, Real step) {
    const int n = static_cast<int>(f.size());
    std::vector<int> v(n);
    std::vector<Real> z(n + 1);
    const Real inf = std::numeric_limits<Real>::infinity();
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        const Real pq = q * step;
        while (k >= 0) {
            const Real pv = v[k] * step;
            const Real s = ((f[q] + pq * pq) - (f[v[k]] + pv * pv)) / (2.0 * (pq - pv));
            if (s <= z[k]) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -inf : ((f[q] + pq * pq) - (f[v[k - 1]] + (v[k - 1] * step) * (v[k - 1] * step))) /
                                   (2.0 * (pq - v[k - 1] * step));
        z[k + 1] = inf;
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        const Real pq = q * step;
        while (z[j + 1] < pq) ++j;
        const Real diff = pq - v[j] * step;
        d[q] = diff * diff + f[v[j]];
    }
}

}  // namespace detail

// Squared Euclidean distance from every pixel to the nearest set pixel.
inline std::vector<Real> squared_distance_transform(const Mask& m, int height, int width, Real sy, Real sx) {
    const Real inf = std::numeric_limits<Real>::infinity();
    std::vector<Real> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 0.0 : inf;
    std::vector<Real> f(static_cast<std::size_t>(std::max(height, width))), d(f.size());
    f.resize(height);
    d.resize(height);
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) f[y] = out[static_cast<std::size_t>(y) * width + x];
        detail::edt_1d(f, d, sy);
        for (int y = 0; y < height; ++y) out[static_cast<std::size_t>(y) * width + x] = d[y];
    }
    f.resize(width);
    d.resize(width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) f[x] = out[static_cast<std::size_t>(y) * width + x];
        detail::edt_1d(f, d, sx);
        for (int x = 0; x < width; ++x) out[static_cast<std::size_t>(y) * width + x] = d[x];
    }
    return out;
}

struct Spacing {
    Real y = 1.0;
    Real x = 1.0;
};

// Average symmetric surface distance; empty when either boundary is empty.
inline std::optional<Real> assd(const Mask& pred, const Mask& gt, int height, int width, Spacing sp = {}) {
    if (pred.size() != gt.size()) throw ShapeError("assd: mask size mismatch");
    if (!(sp.y > 0.0 && sp.x > 0.0)) throw std::invalid_argument("assd: spacing must be > 0");
    const Mask bp = boundary(pred, height, width);
    const Mask bg = boundary(gt, height, width);
    const auto np = std::count(bp.begin(), bp.end(), 1);
    const auto ng = std::count(bg.begin(), bg.end(), 1);
    if (np == 0 || ng == 0) return std::nullopt;
    const auto dt_g = squared_distance_transform(bg, height, width, sp.y, sp.x);
    const auto dt_p = squared_distance_transform(bp, height, width, sp.y, sp.x);
    Real a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < bp.size(); ++i) {
        if (bp[i]) a += std::sqrt(dt_g[i]);
        if (bg[i]) b += std::sqrt(dt_p[i]);
    }
    return 0.5 * (a / static_cast<Real>(np) + b / static_cast<Real>(ng));
}

enum class DiceMode { pooled, per_image };

struct MetricOptions {
    DiceMode dice_mode = DiceMode::pooled;
    Spacing spacing;
};

struct MetricReport {
    std::string tag;
    std::string setting;
    std::vector<std::string> class_names;  // index 0 = background
    std::vector<int> unseen;
    std::vector<Real> dice;                // per class, index 0 unused (NaN)
    std::vector<Real> assd;                // NaN when undefined on every image
    std::vector<int> assd_undefined;       // images excluded from the ASSD mean
    int images = 0;

    [[nodiscard]] int num_classes() const { return static_cast<int>(class_names.size()); }

    [[nodiscard]] bool is_unseen(int c) const { return std::find(unseen.begin(), unseen.end(), c) != unseen.end(); }

    [[nodiscard]] Real mean_over(const std::vector<Real>& v, int which) const {
        // which: 0 = seen, 1 = unseen, 2 = all structures
        Real s = 0.0;
        int n = 0;
        for (int c = 1; c < num_classes(); ++c) {
            if (which == 0 && is_unseen(c)) continue;
            if (which == 1 && !is_unseen(c)) continue;
            if (std::isnan(v[c])) continue;
            s += v[c];
            ++n;
        }
        return n == 0 ? std::numeric_limits<Real>::quiet_NaN() : s / n;
    }
    [[nodiscard]] Real seen_mean() const { return mean_over(dice, 0); }
    [[nodiscard]] Real unseen_mean() const { return mean_over(dice, 1); }
    [[nodiscard]] Real overall_mean() const { return mean_over(dice, 2); }
    [[nodiscard]] Real seen_assd() const { return mean_over(assd, 0); }
    [[nodiscard]] Real unseen_assd() const { return mean_over(assd, 1); }
    [[nodiscard]] Real overall_assd() const { return mean_over(assd, 2); }

    [[nodiscard]] std::string unseen_label() const {
        if (unseen.empty()) return "fully supervised";
        std::string s;
        for (std::size_t i = 0; i < unseen.size(); ++i) {
            if (i) s += '+';
            s += class_names.at(unseen[i]);
        }
        return s;
    }
};

// Dice from pooled pixel counts (or the per-image mean) plus per-image ASSD
// averaged over the images where it is defined.  `predictions` are argmax maps.
inline MetricReport aggregate_metrics(const std::vector<std::vector<std::uint8_t>>& predictions,
                                      const std::vector<const LabelMap*>& truths, const std::vector<int>& unseen,
                                      const MetricOptions& opt = {}) {
    if (predictions.empty() || predictions.size() != truths.size())
        throw std::invalid_argument("evaluate: empty or inconsistent test split");
    MetricReport r;
    r.class_names = truths.front()->class_names;
    r.unseen = unseen;
    std::sort(r.unseen.begin(), r.unseen.end());
    const int C = r.num_classes();
    const Real nan = std::numeric_limits<Real>::quiet_NaN();
    r.dice.assign(C, nan);
    r.assd.assign(C, nan);
    r.assd_undefined.assign(C, 0);
    r.images = static_cast<int>(predictions.size());
    std::vector<OverlapCounts> pooled(C);
    std::vector<Real> dice_sum(C, 0.0);
    std::vector<Real> assd_sum(C, 0.0);
    std::vector<int> assd_n(C, 0);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const LabelMap& t = *truths[i];
        const auto gt = t.indices();
        if (predictions[i].size() != gt.size()) throw ShapeError("evaluate: prediction extent mismatch");
        for (int c = 1; c < C; ++c) {
            const Mask p = class_mask(predictions[i], c);
            const Mask g = class_mask(gt, c);
            const OverlapCounts o = overlap(p, g);
            pooled[c].intersection += o.intersection;
            pooled[c].pred += o.pred;
            pooled[c].truth += o.truth;
            dice_sum[c] += dice_from_counts(o);
            const auto a = assd(p, g, t.height(), t.width(), opt.spacing);
            if (a) {
                assd_sum[c] += *a;
                ++assd_n[c];
            } else {
                ++r.assd_undefined[c];
            }
        }
    }
    for (int c = 1; c < C; ++c) {
        r.dice[c] = opt.dice_mode == DiceMode::pooled ? dice_from_counts(pooled[c]) : dice_sum[c] / r.images;
        if (assd_n[c] > 0) r.assd[c] = assd_sum[c] / assd_n[c];
    }
    return r;
}

// Evaluates `model` on the given mirror samples.
inline MetricReport evaluate(const SegmentationNet& model, const SegmentationNet* prior, bool use_attention,
                             const DatasetBundle& data, const std::vector<std::size_t>& indices,
                             const MetricOptions& opt = {}) {
    if (indices.empty()) throw std::invalid_argument("evaluate: empty test split");
    if (model.config.num_classes != data.num_classes())
        throw ShapeError("evaluate: model and dataset class counts differ");
    std::vector<std::vector<std::uint8_t>> preds;
    std::vector<const LabelMap*> truths;
    for (auto i : indices) {
        preds.push_back(predict_labels(model, prior, use_attention, data.mirror.at(i).image));
        truths.push_back(&data.mirror[i].label);
    }
    return aggregate_metrics(preds, truths, data.unseen, opt);
}

namespace detail {

inline std::string fmt(Real v, int prec = 4) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

inline std::string pct(Real v) { return std::isnan(v) ? "  n/a" : fmt(100.0 * v, 2); }

}  // namespace detail

inline std::string metrics_csv_header() {
    return "tag,setting,unseen_set,class_index,class_name,role,dice,assd,assd_undefined_images,images\n";
}

inline std::string metrics_csv_rows(const MetricReport& r) {
    std::ostringstream os;
    for (int c = 1; c < r.num_classes(); ++c)
        os << r.tag << ',' << r.setting << ',' << r.unseen_label() << ',' << c << ',' << r.class_names[c] << ','
           << (r.is_unseen(c) ? "unseen" : "seen") << ',' << detail::fmt(r.dice[c], 6) << ','
           << detail::fmt(r.assd[c], 6) << ',' << r.assd_undefined[c] << ',' << r.images << '\n';
    return os.str();
}

inline std::string metrics_csv(const std::vector<MetricReport>& reports) {
    std::string s = metrics_csv_header();
    for (const auto& r : reports) s += metrics_csv_rows(r);
    return s;
}

// Text table: one row per report, Dice/ASSD per class then seen/unseen/mean.
inline std::string metrics_table(const std::vector<MetricReport>& reports, const std::string& title = {}) {
    if (reports.empty()) return {};
    std::ostringstream os;
    const auto& names = reports.front().class_names;
    if (!title.empty()) os << title << '\n';
    os << std::left << std::setw(14) << "run" << std::setw(20) << "unseen";
    for (std::size_t c = 1; c < names.size(); ++c) os << std::right << std::setw(10) << names[c] << std::setw(8) << "ASSD";
    os << std::setw(10) << "seen" << std::setw(10) << "unseen" << std::setw(10) << "mean" << '\n';
    for (const auto& r : reports) {
        os << std::left << std::setw(14) << (r.setting.empty() ? r.tag : r.setting) << std::setw(20) << r.unseen_label();
        for (int c = 1; c < r.num_classes(); ++c) {
            const std::string d = detail::pct(r.dice[c]) + (r.is_unseen(c) ? "*" : " ");
            os << std::right << std::setw(10) << d << std::setw(8) << detail::fmt(r.assd[c], 2);
        }
        os << std::setw(10) << detail::pct(r.seen_mean()) << std::setw(10) << detail::pct(r.unseen_mean())
           << std::setw(10) << detail::pct(r.overall_mean()) << '\n';
    }
    os << "Dice in %, ASSD in pixels; * marks unseen classes.\n";
    return os.str();
}

}  // namespace zsseg

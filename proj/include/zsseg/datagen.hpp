#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "zsseg/io.hpp"
#include "zsseg/losses.hpp"
#include "zsseg/rng.hpp"
#include "zsseg/tensor.hpp"

namespace zsseg {

// One-hot label grid (C x H x W, channel 0 = background).  `body` marks the
// background pixels inside the body outline; it only affects rendering.
struct LabelMap {
    Tensor grid;
    std::vector<std::string> class_names;
    std::vector<std::uint8_t> body;

    [[nodiscard]] int num_classes() const { return grid.channels(); }
    [[nodiscard]] int height() const { return grid.height(); }
    [[nodiscard]] int width() const { return grid.width(); }

    [[nodiscard]] int class_at(std::size_t i) const {
        const std::size_t plane = grid.shape().plane();
        for (int c = 0; c < grid.channels(); ++c)
            if (grid[c * plane + i] != 0.0) return c;
        return -1;
    }

    [[nodiscard]] std::vector<std::uint8_t> indices() const {
        std::vector<std::uint8_t> out(grid.shape().plane());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<std::uint8_t>(class_at(i));
        return out;
    }

    static LabelMap from_indices(const std::vector<std::uint8_t>& idx, int height, int width,
                                 std::vector<std::string> names, std::vector<std::uint8_t> body = {}) {
        const int C = static_cast<int>(names.size());
        if (idx.size() != static_cast<std::size_t>(height) * width)
            throw ShapeError("LabelMap::from_indices: index map size does not match extent");
        LabelMap m{Tensor(C, height, width), std::move(names), std::move(body)};
        if (m.body.empty()) m.body.assign(idx.size(), 0);
        const std::size_t plane = idx.size();
        for (std::size_t i = 0; i < plane; ++i) {
            if (idx[i] >= C) throw std::invalid_argument("LabelMap::from_indices: class index out of range");
            m.grid[idx[i] * plane + i] = 1.0;
        }
        return m;
    }

    // Throws if a pixel is not one-hot or a class is absent.
    void validate(bool require_all_classes = true) const {
        if (static_cast<int>(class_names.size()) != grid.channels())
            throw std::logic_error("LabelMap: class_names length does not match channel count");
        const std::size_t plane = grid.shape().plane();
        std::vector<std::size_t> counts(grid.channels(), 0);
        for (std::size_t i = 0; i < plane; ++i) {
            Real s = 0.0;
            for (int c = 0; c < grid.channels(); ++c) {
                const Real v = grid[c * plane + i];
                if (v != 0.0 && v != 1.0) throw std::logic_error("LabelMap: non-binary entry");
                s += v;
                if (v == 1.0) ++counts[c];
            }
            if (s != 1.0) throw std::logic_error("LabelMap: pixel is not one-hot");
        }
        if (require_all_classes)
            for (int c = 0; c < grid.channels(); ++c)
                if (counts[c] == 0) throw std::logic_error("LabelMap: class '" + class_names[c] + "' is empty");
    }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct LabeledSample {
    Tensor image;  // 1 x H x W, standardised
    LabelMap label;
};

// Ellipse template in normalised image coordinates.  Structures are drawn in
// order, so later entries overwrite earlier ones where they overlap.
struct StructureTemplate {
    std::string name;
    Real cx = 0.5, cy = 0.5;
    Real rx = 0.1, ry = 0.1;

    friend bool operator==(const StructureTemplate&, const StructureTemplate&) = default;
};

struct Layout {
    int size = 64;
    std::vector<StructureTemplate> structures;
    Real position_jitter = 0.04;
    Real scale_min = 0.8, scale_max = 1.2;
    Real max_rotation = 0.4;  // radians
    StructureTemplate body{"body", 0.5, 0.52, 0.44, 0.38};
    Real body_jitter = 0.02;
    Real body_scale_min = 0.93, body_scale_max = 1.05;
    Real body_max_rotation = 0.1;

    // Four structures with distinct size, aspect ratio and placement.
    static Layout standard(int size = 64) {
        Layout l;
        l.size = size;
        l.structures = {{"liver", 0.33, 0.40, 0.15, 0.12},
                        {"kidney", 0.66, 0.68, 0.06, 0.07},
                        {"spleen", 0.74, 0.36, 0.035, 0.11},
                        {"pancreas", 0.42, 0.68, 0.11, 0.035}};
        return l;
    }

    [[nodiscard]] int num_classes() const { return static_cast<int>(structures.size()) + 1; }

    [[nodiscard]] std::vector<std::string> class_names() const {
        std::vector<std::string> n{"background"};
        for (const auto& s : structures) n.push_back(s.name);
        return n;
    }

    void validate() const {
        if (size < 8) throw std::invalid_argument("layout size must be >= 8");
        if (structures.empty()) throw std::invalid_argument("layout needs at least one structure");
        if (structures.size() > 254) throw std::invalid_argument("too many structures");
        if (!(scale_min > 0.0 && scale_min <= scale_max)) throw std::invalid_argument("bad scale range");
        for (const auto& s : structures)
            if (!(s.rx > 0.0 && s.ry > 0.0)) throw std::invalid_argument("structure radii must be > 0");
    }

    friend bool operator==(const Layout&, const Layout&) = default;
};

// Appearance of one modality: intensity of background tissue (index 0) and
// each structure, passed through x -> sigmoid(gain * (x^gamma - offset))
// rescaled to [0,1], plus a smooth bias field and Gaussian noise.
struct ModalityProfile {
    std::string name;
    std::vector<Real> base;
    Real air = 0.0;
    Real gamma = 1.0;
    Real gain = 6.0;
    Real offset = 0.5;
    Real bias_amplitude = 0.05;
    Real noise_sigma = 0.04;

    [[nodiscard]] Real transfer(Real v) const {
        const auto s = [&](Real t) { return 1.0 / (1.0 + std::exp(-gain * (t - offset))); };
        const Real lo = s(0.0), hi = s(1.0);
        return (s(std::pow(v, gamma)) - lo) / (hi - lo);
    }

    void validate(int num_classes) const {
        if (static_cast<int>(base.size()) != num_classes)
            throw std::invalid_argument("profile '" + name + "': need one base intensity per class");
        for (Real b : base)
            if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("profile '" + name + "': base outside [0,1]");
        if (!(air >= 0.0 && air <= 1.0)) throw std::invalid_argument("profile '" + name + "': air outside [0,1]");
        if (!(gamma > 0.0 && gain > 0.0))
            throw std::invalid_argument("profile '" + name + "': transfer must be strictly increasing");
        if (!(bias_amplitude >= 0.0 && noise_sigma >= 0.0))
            throw std::invalid_argument("profile '" + name + "': negative bias or noise");
    }

    friend bool operator==(const ModalityProfile&, const ModalityProfile&) = default;
};

inline ModalityProfile default_profile_a() {
    return {"A", {0.30, 0.50, 0.90, 0.70, 0.60}, 0.0, 1.0, 6.0, 0.5, 0.05, 0.04};
}

inline ModalityProfile default_profile_b() {
    return {"B", {0.35, 0.70, 0.55, 0.90, 0.45}, 0.05, 1.0, 6.0, 0.5, 0.08, 0.06};
}

// True if some pair of classes is ordered differently by the two profiles.
inline bool intensity_order_differs(const ModalityProfile& a, const ModalityProfile& b) {
    if (a.base.size() != b.base.size()) return true;
    for (std::size_t i = 0; i < a.base.size(); ++i)
        for (std::size_t j = i + 1; j < a.base.size(); ++j) {
            const Real da = a.base[i] - a.base[j];
            const Real db = b.base[i] - b.base[j];
            if ((da > 0.0 && db < 0.0) || (da < 0.0 && db > 0.0)) return true;
        }
    return false;
}

namespace detail {

struct Ellipse {
    Real cx, cy, rx, ry, theta;

    [[nodiscard]] bool contains(Real x, Real y) const {
        const Real c = std::cos(theta), s = std::sin(theta);
        const Real dx = x - cx, dy = y - cy;
        const Real u = c * dx + s * dy;
        const Real v = -s * dx + c * dy;
        return (u / rx) * (u / rx) + (v / ry) * (v / ry) <= 1.0;
    }
};

inline Ellipse draw_ellipse(const StructureTemplate& t, Real jitter, Real smin, Real smax, Real rot, Rng& rng) {
    Ellipse e{};
    e.cx = t.cx + rng.uniform(-jitter, jitter);
    e.cy = t.cy + rng.uniform(-jitter, jitter);
    e.rx = t.rx * rng.uniform(smin, smax);
    e.ry = t.ry * rng.uniform(smin, smax);
    e.theta = rng.uniform(-rot, rot);
    return e;
}

inline constexpr std::uint64_t kTagAnatomy = 0xA1;
inline constexpr std::uint64_t kTagRender = 0xB2;
inline constexpr std::uint64_t kTagAugment = 0xC3;
inline constexpr std::uint64_t kTagSplit = 0xD4;

}  // namespace detail

// Samples a body outline and one ellipse per structure.  Retries up to 100
// times when a structure is fully covered or the background vanishes.
inline LabelMap generate_anatomy(std::uint64_t seed, const Layout& layout) {
    layout.validate();
    Rng rng = Rng::derive(seed, detail::kTagAnatomy);
    const int n = layout.size;
    const int C = layout.num_classes();
    for (int attempt = 0; attempt < 100; ++attempt) {
        const detail::Ellipse body =
            detail::draw_ellipse(layout.body, layout.body_jitter, layout.body_scale_min, layout.body_scale_max,
                                 layout.body_max_rotation, rng);
        std::vector<detail::Ellipse> organs;
        for (const auto& s : layout.structures)
            organs.push_back(detail::draw_ellipse(s, layout.position_jitter, layout.scale_min, layout.scale_max,
                                                  layout.max_rotation, rng));
        std::vector<std::uint8_t> idx(static_cast<std::size_t>(n) * n, 0);
        std::vector<std::uint8_t> inside(idx.size(), 0);
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                const Real px = (x + 0.5) / n, py = (y + 0.5) / n;
                const std::size_t i = static_cast<std::size_t>(y) * n + x;
                inside[i] = body.contains(px, py) ? 1 : 0;
                for (std::size_t k = 0; k < organs.size(); ++k)
                    if (organs[k].contains(px, py)) idx[i] = static_cast<std::uint8_t>(k + 1);
            }
        }
        std::vector<std::size_t> counts(C, 0);
        for (auto v : idx) ++counts[v];
        if (std::any_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0; })) continue;
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (idx[i] != 0) inside[i] = 1;
        return LabelMap::from_indices(idx, n, n, layout.class_names(), std::move(inside));
    }
    throw std::runtime_error("generate_anatomy: layout infeasible (a class stayed empty after 100 attempts)");
}

// Raw rendering in [0,1]: transfer(base[class]) + bias field + noise, clipped.
inline Tensor render_modality(const LabelMap& label, const ModalityProfile& profile, std::uint64_t seed) {
    profile.validate(label.num_classes());
    Rng rng = Rng::derive(seed, detail::kTagRender);
    const int h = label.height(), w = label.width();
    const Real phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Real phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<Real> level(label.num_classes());
    for (int c = 0; c < label.num_classes(); ++c) level[c] = profile.transfer(profile.base[c]);
    const Real air = profile.transfer(profile.air);
    Tensor img(1, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const int c = label.class_at(i);
            Real v = (c == 0 && !label.body[i]) ? air : level[c];
            const Real fx = static_cast<Real>(x) / w, fy = static_cast<Real>(y) / h;
            v += profile.bias_amplitude * std::sin(2.0 * std::numbers::pi * 0.7 * fx + phase_x) *
                 std::cos(2.0 * std::numbers::pi * 0.6 * fy + phase_y);
            if (profile.noise_sigma > 0.0) v += rng.normal(0.0, profile.noise_sigma);
            img[i] = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

// Per-image zero mean, unit (population) standard deviation.
inline Tensor normalize(Tensor image) {
    if (image.empty()) throw std::invalid_argument("normalize: empty image");
    const Real n = static_cast<Real>(image.size());
    Real mean = 0.0;
    for (Real v : image.values()) mean += v;
    mean /= n;
    Real var = 0.0;
    for (Real v : image.values()) var += (v - mean) * (v - mean);
    var /= n;
    if (!(var > 0.0) || !std::isfinite(var)) throw std::domain_error("normalize: image has zero variance");
    const Real inv = 1.0 / std::sqrt(var);
    for (Real& v : image.values()) v = (v - mean) * inv;
    return image;
}

struct AugmentParams {
    bool flip = false;  // mirror along the horizontal axis (x -> W-1-x)
    Real angle = 0.0;   // radians
    Real scale = 1.0;
};

struct AugmentRanges {
    Real flip_probability = 0.5;
    Real max_angle = 0.26;
    Real scale_min = 0.9, scale_max = 1.1;
};

inline AugmentParams draw_augment(std::uint64_t seed, const AugmentRanges& r = {}) {
    Rng rng = Rng::derive(seed, detail::kTagAugment);
    AugmentParams p;
    p.flip = rng.bernoulli(r.flip_probability);
    p.angle = rng.uniform(-r.max_angle, r.max_angle);
    p.scale = rng.uniform(r.scale_min, r.scale_max);
    return p;
}

// Flip is an exact index permutation; rotation/scaling resample about the
// image centre, bilinear for the image and nearest-neighbour for labels.
inline LabeledSample apply_augment(const LabeledSample& s, const AugmentParams& p) {
    const int h = s.image.height(), w = s.image.width();
    if (s.label.height() != h || s.label.width() != w) throw ShapeError("augment: image/label extent mismatch");
    LabeledSample out = s;
    const auto idx = s.label.indices();
    std::vector<std::uint8_t> lab = idx;
    std::vector<std::uint8_t> body = s.label.body;
    if (p.flip) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t d = static_cast<std::size_t>(y) * w + x;
                const std::size_t src = static_cast<std::size_t>(y) * w + (w - 1 - x);
                out.image[d] = s.image[src];
                lab[d] = idx[src];
                body[d] = s.label.body[src];
            }
    }
    if (p.angle != 0.0 || p.scale != 1.0) {
        if (!(p.scale > 0.0)) throw std::invalid_argument("augment: scale must be > 0");
        const Tensor img = out.image;
        const auto lab0 = lab;
        const auto body0 = body;
        Real fill = img[0];
        for (Real v : img.values()) fill = std::min(fill, v);
        const Real c = std::cos(p.angle), sn = std::sin(p.angle);
        const Real cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const Real dx = x - cx, dy = y - cy;
                const Real sx = (c * dx + sn * dy) / p.scale + cx;
                const Real sy = (-sn * dx + c * dy) / p.scale + cy;
                const std::size_t d = static_cast<std::size_t>(y) * w + x;
                const int nx = static_cast<int>(std::lround(sx)), ny = static_cast<int>(std::lround(sy));
                const bool in = nx >= 0 && nx < w && ny >= 0 && ny < h;
                lab[d] = in ? lab0[static_cast<std::size_t>(ny) * w + nx] : 0;
                body[d] = in ? body0[static_cast<std::size_t>(ny) * w + nx] : 0;
                const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
                const Real ax = sx - x0, ay = sy - y0;
                Real acc = 0.0;
                for (int k = 0; k < 4; ++k) {
                    const int xx = x0 + (k & 1), yy = y0 + (k >> 1);
                    const Real wgt = ((k & 1) ? ax : 1.0 - ax) * ((k >> 1) ? ay : 1.0 - ay);
                    const bool ok = xx >= 0 && xx < w && yy >= 0 && yy < h;
                    acc += wgt * (ok ? img[static_cast<std::size_t>(yy) * w + xx] : fill);
                }
                out.image[d] = acc;
            }
        }
    }
    out.label = LabelMap::from_indices(lab, h, w, s.label.class_names, std::move(body));
    return out;
}

inline LabeledSample augment(const LabeledSample& s, std::uint64_t seed, const AugmentRanges& r = {}) {
    return apply_augment(s, draw_augment(seed, r));
}

struct BundleConfig {
    int n_a = 40;
    int n_b = 40;
    Layout layout = Layout::standard();
    ModalityProfile profile_a = default_profile_a();
    ModalityProfile profile_b = default_profile_b();
    std::vector<int> unseen;
    std::uint64_t seed = 2024;
    bool swap_modalities = false;  // use profile B for the prior set and A for the target
    Real train_fraction = 0.8;
};

// D_p (prior modality, fully labelled), D_m (target modality, fully
// labelled mirror) and the seen-only view D_s derived from D_m.
struct DatasetBundle {
    BundleConfig config;
    std::vector<std::string> class_names;
    std::vector<LabeledSample> prior;
    std::vector<LabeledSample> mirror;
    std::vector<int> unseen;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    [[nodiscard]] int num_classes() const { return static_cast<int>(class_names.size()); }

    [[nodiscard]] std::vector<int> seen() const {
        std::vector<int> s;
        for (int c = 1; c < num_classes(); ++c)
            if (std::find(unseen.begin(), unseen.end(), c) == unseen.end()) s.push_back(c);
        return s;
    }

    // D_s label of mirror sample i: only the seen structure channels.
    [[nodiscard]] SeenLabels seen_labels(std::size_t i) const { return seen_view(mirror.at(i).label, seen()); }

    static SeenLabels seen_view(const LabelMap& full, const std::vector<int>& seen) {
        SeenLabels s{Tensor(static_cast<int>(seen.size()), full.height(), full.width()), seen};
        for (std::size_t k = 0; k < seen.size(); ++k) {
            const auto src = full.grid.channel(seen[k]);
            auto dst = s.y.channel(static_cast<int>(k));
            std::copy(src.begin(), src.end(), dst.begin());
        }
        return s;
    }
};

inline void validate_unseen(const std::vector<int>& unseen, int num_classes) {
    std::set<int> u(unseen.begin(), unseen.end());
    if (u.size() != unseen.size()) throw std::invalid_argument("unseen set has duplicates");
    for (int c : u) {
        if (c == 0) throw std::invalid_argument("background cannot be unseen");
        if (c < 0 || c >= num_classes) throw std::invalid_argument("unseen class index out of range");
    }
    if (static_cast<int>(u.size()) >= num_classes - 1)
        throw std::invalid_argument("at least one structure must stay seen");
}

inline LabeledSample make_sample(std::uint64_t seed, const Layout& layout, const ModalityProfile& profile) {
    LabelMap label = generate_anatomy(seed, layout);
    Tensor img = normalize(render_modality(label, profile, seed));
    return {std::move(img), std::move(label)};
}

inline DatasetBundle build_bundle(const BundleConfig& cfg) {
    if (cfg.n_a < 5 || cfg.n_b < 5) throw std::invalid_argument("build_bundle: n_A and n_B must be >= 5");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw std::invalid_argument("build_bundle: train_fraction must be in (0,1)");
    cfg.layout.validate();
    const int C = cfg.layout.num_classes();
    validate_unseen(cfg.unseen, C);
    const ModalityProfile& pa = cfg.swap_modalities ? cfg.profile_b : cfg.profile_a;
    const ModalityProfile& pb = cfg.swap_modalities ? cfg.profile_a : cfg.profile_b;
    pa.validate(C);
    pb.validate(C);

    DatasetBundle b;
    b.config = cfg;
    b.class_names = cfg.layout.class_names();
    b.unseen = cfg.unseen;
    std::sort(b.unseen.begin(), b.unseen.end());
    // Prior and target samples come from disjoint seed streams (different subjects).
    for (int i = 0; i < cfg.n_a; ++i)
        b.prior.push_back(make_sample(Rng::mix(Rng::mix(cfg.seed, 1), static_cast<std::uint64_t>(i)), cfg.layout, pa));
    for (int i = 0; i < cfg.n_b; ++i)
        b.mirror.push_back(make_sample(Rng::mix(Rng::mix(cfg.seed, 2), static_cast<std::uint64_t>(i)), cfg.layout, pb));

    std::vector<std::size_t> order(cfg.n_b);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng::derive(cfg.seed, detail::kTagSplit);
    rng.shuffle(order.begin(), order.end());
    const auto n_train = static_cast<std::size_t>(std::lround(cfg.train_fraction * cfg.n_b));
    b.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    b.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(b.train.begin(), b.train.end());
    std::sort(b.test.begin(), b.test.end());
    return b;
}

// Two-sample Kolmogorov-Smirnov statistic.
inline Real ks_statistic(std::vector<Real> a, std::vector<Real> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    Real d = 0.0;
    while (i < a.size() && j < b.size()) {
        const Real v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<Real>(i) / a.size() - static_cast<Real>(j) / b.size()));
    }
    return d;
}

// ---- on-disk layout -------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json profile_to_json(const ModalityProfile& p) {
    return {{"name", p.name},         {"base", p.base},
            {"air", p.air},           {"gamma", p.gamma},
            {"gain", p.gain},         {"offset", p.offset},
            {"bias_amplitude", p.bias_amplitude}, {"noise_sigma", p.noise_sigma}};
}

inline ModalityProfile profile_from_json(const nlohmann::ordered_json& j) {
    ModalityProfile p;
    p.name = j.at("name").get<std::string>();
    p.base = j.at("base").get<std::vector<Real>>();
    p.air = j.at("air").get<Real>();
    p.gamma = j.at("gamma").get<Real>();
    p.gain = j.at("gain").get<Real>();
    p.offset = j.at("offset").get<Real>();
    p.bias_amplitude = j.at("bias_amplitude").get<Real>();
    p.noise_sigma = j.at("noise_sigma").get<Real>();
    return p;
}

inline nlohmann::ordered_json template_to_json(const StructureTemplate& t) {
    return {{"name", t.name}, {"cx", t.cx}, {"cy", t.cy}, {"rx", t.rx}, {"ry", t.ry}};
}

inline StructureTemplate template_from_json(const nlohmann::ordered_json& j) {
    return {j.at("name").get<std::string>(), j.at("cx").get<Real>(), j.at("cy").get<Real>(),
            j.at("rx").get<Real>(), j.at("ry").get<Real>()};
}

inline nlohmann::ordered_json layout_to_json(const Layout& l) {
    nlohmann::ordered_json s = nlohmann::ordered_json::array();
    for (const auto& t : l.structures) s.push_back(template_to_json(t));
    return {{"size", l.size},
            {"structures", s},
            {"position_jitter", l.position_jitter},
            {"scale_min", l.scale_min},
            {"scale_max", l.scale_max},
            {"max_rotation", l.max_rotation},
            {"body", template_to_json(l.body)},
            {"body_jitter", l.body_jitter},
            {"body_scale_min", l.body_scale_min},
            {"body_scale_max", l.body_scale_max},
            {"body_max_rotation", l.body_max_rotation}};
}

inline Layout layout_from_json(const nlohmann::ordered_json& j) {
    Layout l;
    l.size = j.at("size").get<int>();
    l.structures.clear();
    for (const auto& t : j.at("structures")) l.structures.push_back(template_from_json(t));
    l.position_jitter = j.at("position_jitter").get<Real>();
    l.scale_min = j.at("scale_min").get<Real>();
    l.scale_max = j.at("scale_max").get<Real>();
    l.max_rotation = j.at("max_rotation").get<Real>();
    l.body = template_from_json(j.at("body"));
    l.body_jitter = j.at("body_jitter").get<Real>();
    l.body_scale_min = j.at("body_scale_min").get<Real>();
    l.body_scale_max = j.at("body_scale_max").get<Real>();
    l.body_max_rotation = j.at("body_max_rotation").get<Real>();
    return l;
}

inline Container sample_container(const LabeledSample& s, const std::vector<int>& seen) {
    const int h = s.image.height(), w = s.image.width();
    Container c;
    c.arrays.push_back(NamedArray::from_f64("image", {1, h, w}, {s.image.values().begin(), s.image.values().end()}));
    auto idx = s.label.indices();
    std::vector<std::uint8_t> seen_idx(idx.size(), 0);
    for (std::size_t i = 0; i < idx.size(); ++i)
        if (std::find(seen.begin(), seen.end(), idx[i]) != seen.end()) seen_idx[i] = idx[i];
    c.arrays.push_back(NamedArray::from_u8("label", {h, w}, std::move(idx)));
    c.arrays.push_back(NamedArray::from_u8("seen_label", {h, w}, std::move(seen_idx)));
    c.arrays.push_back(NamedArray::from_u8("body", {h, w}, s.label.body));
    return c;
}

inline LabeledSample sample_from_container(const Container& c, const std::vector<std::string>& names) {
    const NamedArray& img = c.get("image");
    if (img.shape.size() != 3 || img.shape[0] != 1) throw FormatError("sample image must have shape [1,H,W]");
    const int h = static_cast<int>(img.shape[1]), w = static_cast<int>(img.shape[2]);
    LabeledSample s;
    s.image = Tensor(1, h, w);
    const auto v = img.as_f64();
    std::copy(v.begin(), v.end(), s.image.data());
    const NamedArray& lab = c.get("label");
    if (lab.shape != std::vector<std::int64_t>{h, w}) throw FormatError("sample label extent mismatch");
    std::vector<std::uint8_t> body = c.has("body") ? c.get("body").as_u8() : std::vector<std::uint8_t>{};
    s.label = LabelMap::from_indices(lab.as_u8(), h, w, names, std::move(body));
    return s;
}

}  // namespace detail

// Writes manifest.json plus one container per sample under `dir`.
inline void save_bundle(const DatasetBundle& b, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "samples");
    nlohmann::ordered_json m;
    m["format"] = "zsseg-dataset/1";
    m["class_names"] = b.class_names;
    m["unseen"] = b.unseen;
    m["seen"] = b.seen();
    m["seed"] = b.config.seed;
    m["swap_modalities"] = b.config.swap_modalities;
    m["train_fraction"] = b.config.train_fraction;
    m["layout"] = detail::layout_to_json(b.config.layout);
    m["profile_a"] = detail::profile_to_json(b.config.profile_a);
    m["profile_b"] = detail::profile_to_json(b.config.profile_b);
    m["split"] = {{"train", b.train}, {"test", b.test}};
    nlohmann::ordered_json prior = nlohmann::ordered_json::array(), target = nlohmann::ordered_json::array();
    const auto all = [&] {
        std::vector<int> a;
        for (int c = 1; c < b.num_classes(); ++c) a.push_back(c);
        return a;
    }();
    char name[64];
    for (std::size_t i = 0; i < b.prior.size(); ++i) {
        std::snprintf(name, sizeof name, "samples/prior_%04zu.bin", i);
        save_container((fs::path(dir) / name).string(), detail::sample_container(b.prior[i], all));
        prior.push_back(name);
    }
    for (std::size_t i = 0; i < b.mirror.size(); ++i) {
        std::snprintf(name, sizeof name, "samples/target_%04zu.bin", i);
        save_container((fs::path(dir) / name).string(), detail::sample_container(b.mirror[i], b.seen()));
        target.push_back(name);
    }
    m["prior_samples"] = prior;
    m["target_samples"] = target;
    write_text_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

inline DatasetBundle load_bundle(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string path = (fs::path(dir) / "manifest.json").string();
    nlohmann::ordered_json m;
    try {
        m = nlohmann::ordered_json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    try {
        if (m.at("format").get<std::string>() != "zsseg-dataset/1") throw FormatError(path + ": unknown format");
        DatasetBundle b;
        b.class_names = m.at("class_names").get<std::vector<std::string>>();
        b.unseen = m.at("unseen").get<std::vector<int>>();
        b.config.seed = m.at("seed").get<std::uint64_t>();
        b.config.swap_modalities = m.at("swap_modalities").get<bool>();
        b.config.train_fraction = m.at("train_fraction").get<Real>();
        b.config.layout = detail::layout_from_json(m.at("layout"));
        b.config.profile_a = detail::profile_from_json(m.at("profile_a"));
        b.config.profile_b = detail::profile_from_json(m.at("profile_b"));
        b.config.unseen = b.unseen;
        b.train = m.at("split").at("train").get<std::vector<std::size_t>>();
        b.test = m.at("split").at("test").get<std::vector<std::size_t>>();
        validate_unseen(b.unseen, static_cast<int>(b.class_names.size()));
        for (const auto& f : m.at("prior_samples"))
            b.prior.push_back(detail::sample_from_container(load_container((fs::path(dir) / f.get<std::string>()).string()),
                                                            b.class_names));
        for (const auto& f : m.at("target_samples"))
            b.mirror.push_back(detail::sample_from_container(
                load_container((fs::path(dir) / f.get<std::string>()).string()), b.class_names));
        b.config.n_a = static_cast<int>(b.prior.size());
        b.config.n_b = static_cast<int>(b.mirror.size());
        for (auto i : b.train)
            if (i >= b.mirror.size()) throw FormatError(path + ": split index out of range");
        for (auto i : b.test)
            if (i >= b.mirror.size()) throw FormatError(path + ": split index out of range");
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace zsseg

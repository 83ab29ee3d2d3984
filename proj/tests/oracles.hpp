#pragma once

// Straightforward scalar-loop reference implementations used to cross-check
// the library.  Nothing here calls into the code under test except for the
// plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "zsseg/tensor.hpp"

namespace oracle {

using zsseg::Real;
using zsseg::Tensor;

constexpr Real kEps = 1e-8;

inline Real stage1(const Tensor& m, const Tensor& y) {
    Real s = 0.0;
    for (int c = 0; c < m.channels(); ++c)
        for (int i = 0; i < m.height(); ++i)
            for (int j = 0; j < m.width(); ++j) s += -y(c, i, j) * std::log(m(c, i, j) + kEps);
    return s / static_cast<Real>(m.size());
}

// y has one channel per entry of `channels` (the seen structure indices).
inline Real seen(const Tensor& m, const Tensor& y, const std::vector<int>& channels) {
    Real s = 0.0;
    for (std::size_t k = 0; k < channels.size(); ++k)
        for (int i = 0; i < m.height(); ++i)
            for (int j = 0; j < m.width(); ++j)
                s += y(static_cast<int>(k), i, j) * std::log(m(channels[k], i, j) + kEps);
    return -s / (static_cast<Real>(m.height()) * m.width() * channels.size());
}

inline Real cross(const Tensor& m_ps, const Tensor& m_sp, const Tensor& y, const std::vector<int>& channels) {
    return seen(m_ps, y, channels) + seen(m_sp, y, channels);
}

inline Real bg(const Tensor& yhat, const Tensor& m) {
    Real s = 0.0;
    for (int i = 0; i < m.height(); ++i)
        for (int j = 0; j < m.width(); ++j) {
            const Real d = yhat(0, i, j) - m(0, i, j);
            s += d * d;
        }
    return s / (static_cast<Real>(m.height()) * m.width());
}

inline Real disc(const Tensor& dp, const Tensor& dsp, const Tensor& dps, const Tensor& ds, const Real lam[4]) {
    Real s = 0.0;
    for (std::size_t i = 0; i < dp.size(); ++i)
        s += -lam[0] * std::log(dp[i] + kEps) - lam[1] * std::log(1.0 - dsp[i] + kEps) -
             lam[2] * std::log(1.0 - dps[i] + kEps) - lam[3] * std::log(1.0 - ds[i] + kEps);
    return s / static_cast<Real>(dp.size());
}

inline Real adv(const Tensor& dsp, const Tensor& dps, const Tensor& ds) {
    Real s = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        s += -std::log(dsp[i] + kEps) - std::log(dps[i] + kEps) - std::log(ds[i] + kEps);
    return s / static_cast<Real>(ds.size());
}

// Softmax without the max shift.
inline Tensor softmax(const Tensor& z) {
    Tensor p(z.shape());
    for (int i = 0; i < z.height(); ++i)
        for (int j = 0; j < z.width(); ++j) {
            Real sum = 0.0;
            for (int c = 0; c < z.channels(); ++c) sum += std::exp(z(c, i, j));
            for (int c = 0; c < z.channels(); ++c) p(c, i, j) = std::exp(z(c, i, j)) / sum;
        }
    return p;
}

inline Tensor guidance(const Tensor& p) {
    Tensor g(1, p.height(), p.width());
    for (int i = 0; i < p.height(); ++i)
        for (int j = 0; j < p.width(); ++j) {
            Real m = -1.0;
            for (int c = 1; c < p.channels(); ++c) m = std::max(m, p(c, i, j));
            g(0, i, j) = m;
        }
    return g;
}

inline Tensor pseudo_background(const Tensor& p) {
    Tensor y(1, p.height(), p.width());
    for (int i = 0; i < p.height(); ++i)
        for (int j = 0; j < p.width(); ++j) {
            int arg = 0;
            for (int c = 1; c < p.channels(); ++c)
                if (p(c, i, j) > p(arg, i, j)) arg = c;
            y(0, i, j) = arg == 0 ? 1.0 : 0.0;
        }
    return y;
}

// Direct-loop convolution.
inline Tensor conv2d(const Tensor& x, const std::vector<Real>& w, const std::vector<Real>& b, int out, int k,
                     int stride, int pad, int dil) {
    const int oh = (x.height() + 2 * pad - dil * (k - 1) - 1) / stride + 1;
    const int ow = (x.width() + 2 * pad - dil * (k - 1) - 1) / stride + 1;
    Tensor y(out, oh, ow);
    for (int o = 0; o < out; ++o)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                Real s = b.empty() ? 0.0 : b[o];
                for (int c = 0; c < x.channels(); ++c)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int yy = i * stride - pad + ky * dil;
                            const int xx = j * stride - pad + kx * dil;
                            if (yy < 0 || yy >= x.height() || xx < 0 || xx >= x.width()) continue;
                            s += w[((o * x.channels() + c) * k + ky) * k + kx] * x(c, yy, xx);
                        }
                y(o, i, j) = s;
            }
    return y;
}

// Bilinear resize with half-pixel centres, edge clamped.
inline Tensor upsample(const Tensor& x, int f) {
    Tensor y(x.channels(), x.height() * f, x.width() * f);
    const auto coord = [&](int o, int n, int& i0, int& i1, Real& t) {
        Real s = std::max(0.0, (o + 0.5) / f - 0.5);
        i0 = std::min(static_cast<int>(std::floor(s)), n - 1);
        i1 = std::min(i0 + 1, n - 1);
        t = s - i0;
    };
    for (int c = 0; c < x.channels(); ++c)
        for (int i = 0; i < y.height(); ++i)
            for (int j = 0; j < y.width(); ++j) {
                int a0, a1, b0, b1;
                Real ta, tb;
                coord(i, x.height(), a0, a1, ta);
                coord(j, x.width(), b0, b1, tb);
                const Real top = (1 - tb) * x(c, a0, b0) + tb * x(c, a0, b1);
                const Real bot = (1 - tb) * x(c, a1, b0) + tb * x(c, a1, b1);
                y(c, i, j) = (1 - ta) * top + ta * bot;
            }
    return y;
}

inline Real dice(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& g) {
    Real inter = 0, sp = 0, sg = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += (p[i] && g[i]);
        sp += p[i] != 0;
        sg += g[i] != 0;
    }
    if (sp + sg == 0) return 1.0;
    return 2 * inter / (sp + sg);
}

// Mask minus its 4-neighbour erosion (outside the image counts as empty).
inline std::vector<std::uint8_t> edge(const std::vector<std::uint8_t>& m, int h, int w) {
    std::vector<std::uint8_t> eroded(m.size(), 0);
    for (int i = 1; i + 1 < h; ++i)
        for (int j = 1; j + 1 < w; ++j) {
            const auto at = [&](int a, int b) { return m[static_cast<std::size_t>(a) * w + b] != 0; };
            eroded[static_cast<std::size_t>(i) * w + j] = at(i, j) && at(i - 1, j) && at(i + 1, j) && at(i, j - 1) && at(i, j + 1);
        }
    std::vector<std::uint8_t> e(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) e[i] = (m[i] && !eroded[i]) ? 1 : 0;
    return e;
}

// All-pairs nearest boundary distance.
inline std::optional<Real> assd(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& g, int h, int w,
                                Real sy = 1.0, Real sx = 1.0) {
    const auto bp = edge(p, h, w), bg = edge(g, h, w);
    std::vector<std::pair<int, int>> a, b;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            if (bp[static_cast<std::size_t>(i) * w + j]) a.emplace_back(i, j);
            if (bg[static_cast<std::size_t>(i) * w + j]) b.emplace_back(i, j);
        }
    if (a.empty() || b.empty()) return std::nullopt;
    const auto directed = [&](const auto& from, const auto& to) {
        Real s = 0.0;
        for (const auto& [i, j] : from) {
            Real best = std::numeric_limits<Real>::infinity();
            for (const auto& [k, l] : to) best = std::min(best, std::hypot((i - k) * sy, (j - l) * sx));
            s += best;
        }
        return s / static_cast<Real>(from.size());
    };
    return 0.5 * (directed(a, b) + directed(b, a));
}

}  // namespace oracle

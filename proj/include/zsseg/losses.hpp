#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsseg/tensor.hpp"

namespace zsseg {

inline constexpr Real kLogEps = 1e-8;

struct LossWeights {
    // Discriminator terms: real m_p, fake m_sp, fake m_ps, fake m_s.
    std::array<Real, 4> lambda{3.0, 1.0, 1.0, 1.0};
    // Model terms: L_Cross, L_Seen, L_Bg, L_Adv.
    std::array<Real, 4> omega{0.5, 1.0, 0.01, 1.0};

    void validate() const {
        for (Real v : lambda)
            if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("lambda weights must be >= 0");
        for (Real v : omega)
            if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("omega weights must be >= 0");
    }

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBundle {
    Real cross = 0.0;
    Real seen = 0.0;
    Real bg = 0.0;
    Real adv = 0.0;
    Real seg = 0.0;
    Real disc = 0.0;

    [[nodiscard]] bool all_finite() const {
        return std::isfinite(cross) && std::isfinite(seen) && std::isfinite(bg) && std::isfinite(adv) &&
               std::isfinite(seg) && std::isfinite(disc);
    }
};

// Scalar loss with its gradient with respect to the input map(s).
struct LossGrad {
    Real value = 0.0;
    Tensor grad;
};

// Seen-class annotation of a Modality B sample: one channel per seen class,
// `channels[k]` is the index of that class in the full C-channel maps.
struct SeenLabels {
    Tensor y;
    std::vector<int> channels;
};

namespace detail {

inline void check_probs(const Tensor& m, const char* what) {
    for (Real v : m.values()) {
        if (std::isnan(v)) throw std::domain_error(std::string(what) + ": non-finite probability");
        if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error(std::string(what) + ": probability outside [0,1]");
    }
}

inline void check_open_unit(const Tensor& d, const char* what) {
    for (Real v : d.values())
        if (!(v > 0.0 && v < 1.0)) throw std::domain_error(std::string(what) + ": score outside (0,1)");
}

inline void check_seen(const Tensor& m, const SeenLabels& s, const char* what) {
    if (s.channels.empty()) throw std::invalid_argument(std::string(what) + ": no seen classes");
    if (static_cast<int>(s.channels.size()) != s.y.channels())
        throw ShapeError(std::string(what) + ": seen label channels do not match channel list");
    if (s.y.height() != m.height() || s.y.width() != m.width())
        throw ShapeError(std::string(what) + ": label extent " + to_string(s.y.shape()) + " vs map " +
                         to_string(m.shape()));
    for (int c : s.channels)
        if (c <= 0 || c >= m.channels())
            throw std::invalid_argument(std::string(what) + ": seen channel out of range");
}

// -(1/K) sum_k y log(m + eps) restricted to the seen channels; accumulates
// the gradient into `grad` scaled by `scale`.
inline Real seen_term(const Tensor& m, const SeenLabels& s, Real inv_k, Real scale, Tensor* grad) {
    const std::size_t plane = m.shape().plane();
    Real total = 0.0;
    for (std::size_t k = 0; k < s.channels.size(); ++k) {
        const auto yc = s.y.channel(static_cast<int>(k));
        const std::size_t off = static_cast<std::size_t>(s.channels[k]) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            const Real y = yc[i];
            if (y == 0.0) continue;
            const Real p = m[off + i] + kLogEps;
            total -= y * std::log(p);
            if (grad) (*grad)[off + i] -= scale * inv_k * y / p;
        }
    }
    return total * inv_k;
}

}  // namespace detail

// Stage-1 cross-entropy over all C channels, mean over W*H*C terms.
inline LossGrad loss_stage1(const Tensor& probs, const Tensor& labels) {
    expect_shape(labels.shape(), probs.shape(), "loss_stage1");
    detail::check_probs(probs, "loss_stage1");
    LossGrad out{0.0, Tensor(probs.shape())};
    const Real inv_k = 1.0 / static_cast<Real>(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const Real y = labels[i];
        if (y == 0.0) continue;
        const Real p = probs[i] + kLogEps;
        out.value -= y * std::log(p);
        out.grad[i] = -inv_k * y / p;
    }
    out.value *= inv_k;
    return out;
}

// L_Seen on m_s, normalised by K_s = W*H*C_s.
inline LossGrad loss_seen(const Tensor& m_s, const SeenLabels& seen) {
    detail::check_seen(m_s, seen, "loss_seen");
    detail::check_probs(m_s, "loss_seen");
    LossGrad out{0.0, Tensor(m_s.shape())};
    const Real inv_k = 1.0 / static_cast<Real>(seen.y.size());
    out.value = detail::seen_term(m_s, seen, inv_k, 1.0, &out.grad);
    return out;
}

struct CrossLoss {
    Real value = 0.0;
    Tensor grad_ps;
    Tensor grad_sp;
};

// L_Cross: the seen-class term applied to both swapped predictions.
inline CrossLoss loss_cross(const Tensor& m_ps, const Tensor& m_sp, const SeenLabels& seen) {
    expect_shape(m_sp.shape(), m_ps.shape(), "loss_cross");
    detail::check_seen(m_ps, seen, "loss_cross");
    detail::check_probs(m_ps, "loss_cross");
    detail::check_probs(m_sp, "loss_cross");
    CrossLoss out{0.0, Tensor(m_ps.shape()), Tensor(m_sp.shape())};
    const Real inv_k = 1.0 / static_cast<Real>(seen.y.size());
    out.value = detail::seen_term(m_ps, seen, inv_k, 1.0, &out.grad_ps) +
                detail::seen_term(m_sp, seen, inv_k, 1.0, &out.grad_sp);
    return out;
}

// 1 where the prior's argmax is background; ties go to the lowest index.
inline Tensor pseudo_background(const Tensor& prior_probs) {
    const Shape s = prior_probs.shape();
    Tensor bg(1, s.height, s.width);
    const std::size_t plane = s.plane();
    for (std::size_t i = 0; i < plane; ++i) {
        const Real b = prior_probs[i];
        bool is_bg = true;
        for (int c = 1; c < s.channels && is_bg; ++c)
            if (prior_probs[c * plane + i] > b) is_bg = false;
        bg[i] = is_bg ? 1.0 : 0.0;
    }
    return bg;
}

// Positive MSE between the pseudo background label and the background channel
// (channel 0) of m_s.  The gradient has the shape of m_s.
inline LossGrad loss_bg(const Tensor& y_bg, const Tensor& m_s) {
    if (y_bg.channels() != 1 || y_bg.height() != m_s.height() || y_bg.width() != m_s.width())
        throw ShapeError("loss_bg: label " + to_string(y_bg.shape()) + " vs map " + to_string(m_s.shape()));
    detail::check_probs(m_s, "loss_bg");
    LossGrad out{0.0, Tensor(m_s.shape())};
    const std::size_t plane = m_s.shape().plane();
    const Real inv_k = 1.0 / static_cast<Real>(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        const Real d = m_s[i] - y_bg[i];
        out.value += d * d;
        out.grad[i] = 2.0 * inv_k * d;
    }
    out.value *= inv_k;
    return out;
}

struct DiscriminatorLoss {
    Real value = 0.0;
    Tensor grad_p, grad_sp, grad_ps, grad_s;
};

// Mean over patch cells of -l0 log d_p - l1 log(1-d_sp) - l2 log(1-d_ps) - l3 log(1-d_s).
inline DiscriminatorLoss loss_discriminator(const Tensor& d_p, const Tensor& d_sp, const Tensor& d_ps,
                                            const Tensor& d_s, const std::array<Real, 4>& lambda) {
    expect_shape(d_sp.shape(), d_p.shape(), "loss_discriminator");
    expect_shape(d_ps.shape(), d_p.shape(), "loss_discriminator");
    expect_shape(d_s.shape(), d_p.shape(), "loss_discriminator");
    detail::check_open_unit(d_p, "loss_discriminator");
    detail::check_open_unit(d_sp, "loss_discriminator");
    detail::check_open_unit(d_ps, "loss_discriminator");
    detail::check_open_unit(d_s, "loss_discriminator");
    const Shape sh = d_p.shape();
    DiscriminatorLoss out{0.0, Tensor(sh), Tensor(sh), Tensor(sh), Tensor(sh)};
    const Real inv_k = 1.0 / static_cast<Real>(d_p.size());
    for (std::size_t i = 0; i < d_p.size(); ++i) {
        out.value -= lambda[0] * std::log(d_p[i] + kLogEps) + lambda[1] * std::log(1.0 - d_sp[i] + kLogEps) +
                     lambda[2] * std::log(1.0 - d_ps[i] + kLogEps) + lambda[3] * std::log(1.0 - d_s[i] + kLogEps);
        out.grad_p[i] = -inv_k * lambda[0] / (d_p[i] + kLogEps);
        out.grad_sp[i] = inv_k * lambda[1] / (1.0 - d_sp[i] + kLogEps);
        out.grad_ps[i] = inv_k * lambda[2] / (1.0 - d_ps[i] + kLogEps);
        out.grad_s[i] = inv_k * lambda[3] / (1.0 - d_s[i] + kLogEps);
    }
    out.value *= inv_k;
    return out;
}

// -log(d + eps) averaged over patch cells, for one fake map.  The generator
// loss sums this term over the three fakes.
inline LossGrad loss_adversarial_term(const Tensor& d) {
    detail::check_open_unit(d, "loss_adversarial");
    LossGrad out{0.0, Tensor(d.shape())};
    const Real inv_k = 1.0 / static_cast<Real>(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        out.value -= std::log(d[i] + kLogEps);
        out.grad[i] = -inv_k / (d[i] + kLogEps);
    }
    out.value *= inv_k;
    return out;
}

struct AdversarialLoss {
    Real value = 0.0;
    Tensor grad_sp, grad_ps, grad_s;
};

inline AdversarialLoss loss_adversarial(const Tensor& d_sp, const Tensor& d_ps, const Tensor& d_s) {
    expect_shape(d_ps.shape(), d_sp.shape(), "loss_adversarial");
    expect_shape(d_s.shape(), d_sp.shape(), "loss_adversarial");
    LossGrad a = loss_adversarial_term(d_sp);
    LossGrad b = loss_adversarial_term(d_ps);
    LossGrad c = loss_adversarial_term(d_s);
    return {a.value + b.value + c.value, std::move(a.grad), std::move(b.grad), std::move(c.grad)};
}

inline Real loss_seg(Real cross, Real seen, Real bg, Real adv, const std::array<Real, 4>& omega) {
    return omega[0] * cross + omega[1] * seen + omega[2] * bg + omega[3] * adv;
}

inline Real loss_seg(const LossBundle& b, const std::array<Real, 4>& omega) {
    return loss_seg(b.cross, b.seen, b.bg, b.adv, omega);
}

}  // namespace zsseg

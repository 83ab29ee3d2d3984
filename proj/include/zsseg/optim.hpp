#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsseg/layers.hpp"

namespace zsseg {

struct SgdConfig {
    Real lr = 2.5e-4;
    Real momentum = 0.9;
    Real weight_decay = 5e-4;
};

struct AdamConfig {
    Real lr = 1e-4;
    Real beta1 = 0.9;
    Real beta2 = 0.99;
    Real eps = 1e-8;
};

namespace detail {

template <typename Net>
std::vector<Parameter*> collect(Net& net) {
    std::vector<Parameter*> ps;
    net.visit([&](Parameter& p) { ps.push_back(&p); });
    return ps;
}

inline void check_slots(const std::vector<std::vector<Real>>& slots, const std::vector<Parameter*>& ps) {
    if (slots.size() != ps.size()) throw std::logic_error("optimizer bound to a different parameter set");
    for (std::size_t i = 0; i < ps.size(); ++i)
        if (slots[i].size() != ps[i]->value.size())
            throw std::logic_error("optimizer slot size mismatch for " + ps[i]->name);
}

inline std::vector<std::vector<Real>> zeros_like(const std::vector<Parameter*>& ps) {
    std::vector<std::vector<Real>> out;
    out.reserve(ps.size());
    for (const Parameter* p : ps) out.emplace_back(p->value.size(), 0.0);
    return out;
}

}  // namespace detail

// SGD with heavy-ball momentum and L2 weight decay added to the gradient:
// v = mu v + (g + wd w); w -= lr v.
class Sgd {
public:
    explicit Sgd(SgdConfig cfg = {}) : cfg_(cfg) {
        if (!(cfg.lr > 0.0)) throw std::invalid_argument("SGD learning rate must be > 0");
    }

    template <typename Net>
    void step(Net& net) {
        auto ps = detail::collect(net);
        if (velocity_.empty()) velocity_ = detail::zeros_like(ps);
        detail::check_slots(velocity_, ps);
        for (std::size_t i = 0; i < ps.size(); ++i) {
            Parameter& p = *ps[i];
            auto& v = velocity_[i];
            for (std::size_t j = 0; j < p.value.size(); ++j) {
                const Real g = p.grad[j] + cfg_.weight_decay * p.value[j];
                v[j] = cfg_.momentum * v[j] + g;
                p.value[j] -= cfg_.lr * v[j];
            }
        }
        ++steps_;
    }

    [[nodiscard]] const SgdConfig& config() const noexcept { return cfg_; }
    void set_lr(Real lr) { cfg_.lr = lr; }
    [[nodiscard]] std::int64_t steps() const noexcept { return steps_; }
    std::vector<std::vector<Real>>& velocity() noexcept { return velocity_; }
    const std::vector<std::vector<Real>>& velocity() const noexcept { return velocity_; }
    void set_steps(std::int64_t s) noexcept { steps_ = s; }

private:
    SgdConfig cfg_;
    std::vector<std::vector<Real>> velocity_;
    std::int64_t steps_ = 0;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {
        if (!(cfg.lr > 0.0)) throw std::invalid_argument("Adam learning rate must be > 0");
    }

    template <typename Net>
    void step(Net& net) {
        auto ps = detail::collect(net);
        if (m_.empty()) {
            m_ = detail::zeros_like(ps);
            v_ = detail::zeros_like(ps);
        }
        detail::check_slots(m_, ps);
        ++steps_;
        const Real c1 = 1.0 - std::pow(cfg_.beta1, static_cast<Real>(steps_));
        const Real c2 = 1.0 - std::pow(cfg_.beta2, static_cast<Real>(steps_));
        for (std::size_t i = 0; i < ps.size(); ++i) {
            Parameter& p = *ps[i];
            for (std::size_t j = 0; j < p.value.size(); ++j) {
                const Real g = p.grad[j];
                m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g;
                v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g * g;
                const Real mhat = m_[i][j] / c1;
                const Real vhat = v_[i][j] / c2;
                p.value[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    [[nodiscard]] const AdamConfig& config() const noexcept { return cfg_; }
    void set_lr(Real lr) { cfg_.lr = lr; }
    [[nodiscard]] std::int64_t steps() const noexcept { return steps_; }
    void set_steps(std::int64_t s) noexcept { steps_ = s; }
    std::vector<std::vector<Real>>& first_moment() noexcept { return m_; }
    std::vector<std::vector<Real>>& second_moment() noexcept { return v_; }
    const std::vector<std::vector<Real>>& first_moment() const noexcept { return m_; }
    const std::vector<std::vector<Real>>& second_moment() const noexcept { return v_; }

private:
    AdamConfig cfg_;
    std::vector<std::vector<Real>> m_, v_;
    std::int64_t steps_ = 0;
};

// Scales all gradients so their joint L2 norm is at most `max_norm`.
// Returns the norm before scaling.
template <typename Net>
Real clip_grad_norm(Net& net, Real max_norm) {
    Real sq = 0.0;
    net.visit([&](const Parameter& p) {
        for (Real g : p.grad) sq += g * g;
    });
    const Real norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const Real s = max_norm / norm;
        net.visit([&](Parameter& p) {
            for (Real& g : p.grad) g *= s;
        });
    }
    return norm;
}

}  // namespace zsseg

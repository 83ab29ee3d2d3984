#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsseg/checkpoint.hpp"
#include "zsseg/datagen.hpp"
#include "zsseg/losses.hpp"
#include "zsseg/nets.hpp"
#include "zsseg/optim.hpp"

namespace zsseg {

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PriorConfig {
    SgdConfig sgd{0.1, 0.9, 5e-4};
    int epochs = 100;
    int batch_size = 8;
    std::uint64_t seed = 11;
};

struct OptimizerConfig {
    SgdConfig model{2.5e-4, 0.9, 5e-4};
    AdamConfig disc{1e-4, 0.9, 0.99, 1e-8};
    int epochs = 60;
    int batch_size = 8;
    bool poly_decay = false;
    Real poly_power = 0.9;
    Real grad_clip = 0.0;  // global-norm clip on the model update; 0 disables
    int checkpoint_every = 10;
};

struct ModuleSwitches {
    bool background = true;  // L_Bg
    bool rpa = true;         // discriminator + L_Adv
    bool cma = true;         // feature swap + L_Cross
    bool ia = true;          // inheritance attention
    bool warm_start = false; // copy prior weights into the zero-shot model

    friend bool operator==(const ModuleSwitches&, const ModuleSwitches&) = default;
};

struct AblationSetup {
    char setting = 'g';
    ModuleSwitches switches;
    LossWeights weights;
};

// Table rows a-g.  Disabled modules zero their loss weight.
inline AblationSetup configure_ablation(char setting, const LossWeights& base = {}) {
    AblationSetup s;
    s.setting = setting;
    s.weights = base;
    ModuleSwitches& m = s.switches;
    switch (setting) {
        case 'a': m = {false, false, false, false, true}; break;
        case 'b': m = {false, false, false, false, false}; break;
        case 'c': m = {true, false, false, false, false}; break;
        case 'd': m = {true, true, true, false, false}; break;
        case 'e': m = {true, true, false, true, false}; break;
        case 'f': m = {true, false, true, true, false}; break;
        case 'g': m = {true, true, true, true, false}; break;
        default: throw std::invalid_argument(std::string("unknown ablation setting '") + setting + "'");
    }
    if (!m.cma) s.weights.omega[0] = 0.0;
    if (!m.background) s.weights.omega[2] = 0.0;
    if (!m.rpa) s.weights.omega[3] = 0.0;
    return s;
}

struct HistoryRow {
    std::int64_t step = 0;
    int epoch = 0;
    LossBundle loss;
};

inline std::string history_csv(const std::vector<HistoryRow>& rows) {
    std::ostringstream os;
    os << "step,epoch,L_Cross,L_Seen,L_Bg,L_Adv,L_Seg,L_D\n";
    os << std::setprecision(17);
    for (const auto& r : rows)
        os << r.step << ',' << r.epoch << ',' << r.loss.cross << ',' << r.loss.seen << ',' << r.loss.bg << ','
           << r.loss.adv << ',' << r.loss.seg << ',' << r.loss.disc << '\n';
    return os.str();
}

// Parameters touched by the model optimizer: the fusion block only when IA is on.
struct ModelParams {
    SegmentationNet* net;
    bool fusion;

    template <typename Fn>
    void visit(Fn&& fn) {
        net->backbone.visit(fn);
        net->segmentor.visit(fn);
        if (fusion) net->fusion.visit(fn);
    }
    template <typename Fn>
    void visit(Fn&& fn) const {
        net->backbone.visit(fn);
        net->segmentor.visit(fn);
        if (fusion) net->fusion.visit(fn);
    }
};

struct TrainState {
    SegmentationNet prior;
    SegmentationNet model;
    DiscriminatorNet disc;
    Sgd model_opt;
    Adam disc_opt;
    AblationSetup setup;
    OptimizerConfig opt;
    std::int64_t step = 0;
    int epoch = 0;
    std::uint64_t seed = 0;

    [[nodiscard]] ModelParams model_params() { return {&model, setup.switches.ia}; }
};

inline TrainState make_train_state(const SegmentationNet& prior, const AblationSetup& setup,
                                   const OptimizerConfig& opt, std::uint64_t seed) {
    setup.weights.validate();
    TrainState s{prior,
                 SegmentationNet(prior.config),
                 DiscriminatorNet(prior.config),
                 Sgd(opt.model),
                 Adam(opt.disc),
                 setup,
                 opt,
                 0,
                 0,
                 seed};
    Rng rng = Rng::derive(seed, 0x5EED);
    s.model.init(rng);
    s.disc.init(rng);
    if (setup.switches.warm_start) {
        s.model.backbone = prior.backbone;
        s.model.segmentor = prior.segmentor;
    }
    zero_grad(s.model);
    zero_grad(s.disc);
    return s;
}

// Discriminator input for a probability map (and its logits).
inline Tensor disc_input(const NetworkConfig& cfg, const Tensor& probs, const Tensor& logits) {
    return cfg.disc_input == DiscriminatorInput::logits ? logits : probs;
}

// Gradient w.r.t. logits given dL/d(probs) and dL/d(disc input).
inline Tensor logits_grad(const NetworkConfig& cfg, Tensor grad_probs, const Tensor& grad_disc, const Tensor& probs) {
    if (cfg.disc_input == DiscriminatorInput::probabilities) {
        if (!grad_disc.empty()) grad_probs += grad_disc;
        return softmax_backward(grad_probs, probs);
    }
    Tensor g = softmax_backward(grad_probs, probs);
    if (!grad_disc.empty()) g += grad_disc;
    return g;
}

struct Batch {
    std::vector<const Tensor*> images;
    std::vector<SeenLabels> labels;
};

namespace detail {

inline void check_finite(const LossBundle& l) {
    const std::pair<const char*, Real> items[] = {{"L_Cross", l.cross}, {"L_Seen", l.seen}, {"L_Bg", l.bg},
                                                  {"L_Adv", l.adv},     {"L_Seg", l.seg},   {"L_D", l.disc}};
    for (const auto& [n, v] : items)
        if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite ") + n);
}

inline Tensor scaled(Tensor t, Real s) {
    t *= s;
    return t;
}

}  // namespace detail

// Losses of one inheritance-stage batch with the current weights.  Leaves
// dL_Seg/dθ in the zero-shot model parameters (through the current
// discriminator) and dL_D/dφ in the discriminator parameters.
inline LossBundle stage2_gradients(TrainState& st, const Batch& batch) {
    if (batch.images.empty() || batch.images.size() != batch.labels.size())
        throw std::invalid_argument("stage2_step: empty or inconsistent batch");
    const ModuleSwitches& sw = st.setup.switches;
    const auto& om = st.setup.weights.omega;
    const auto& lam = st.setup.weights.lambda;
    const NetworkConfig& cfg = st.model.config;
    const bool use_disc = sw.rpa;
    const Real inv_b = 1.0 / static_cast<Real>(batch.images.size());

    zero_grad(st.model);
    zero_grad(st.disc);
    LossBundle total;

    for (std::size_t b = 0; b < batch.images.size(); ++b) {
        const Tensor& x = *batch.images[b];
        const SeenLabels& y = batch.labels[b];

        // Prior (frozen).
        const Tensor f_p = st.prior.backbone.forward(x);
        const Tensor z_p = st.prior.segmentor.forward(f_p);
        const Tensor m_p = softmax_channels(z_p);

        // Zero-shot model.
        Backbone::Cache bb_cache;
        const Tensor f = st.model.backbone.forward(x, &bb_cache);
        AttentionCache ia_cache;
        const Tensor f_s = sw.ia ? inheritance_attention(st.model.fusion, f, inheritance_guidance(m_p), &ia_cache) : f;
        Segmentor::Cache s_cache;
        const Tensor z_s = st.model.segmentor.forward(f_s, &s_cache);
        const Tensor m_s = softmax_channels(z_s);

        Segmentor::Cache ps_cache, sp_cache;
        Tensor z_ps, m_ps, z_sp, m_sp;
        if (sw.cma) {
            z_ps = st.model.segmentor.forward(f_p, &ps_cache);
            m_ps = softmax_channels(z_ps);
            z_sp = st.prior.segmentor.forward(f_s, &sp_cache);
            m_sp = softmax_channels(z_sp);
        }

        LossBundle l;
        const LossGrad seen = loss_seen(m_s, y);
        l.seen = seen.value;
        Tensor g_s = detail::scaled(seen.grad, om[1] * inv_b);
        if (sw.background) {
            const LossGrad bg = loss_bg(pseudo_background(m_p), m_s);
            l.bg = bg.value;
            g_s += detail::scaled(bg.grad, om[2] * inv_b);
        }
        Tensor g_ps, g_sp;
        if (sw.cma) {
            CrossLoss cr = loss_cross(m_ps, m_sp, y);
            l.cross = cr.value;
            g_ps = detail::scaled(std::move(cr.grad_ps), om[0] * inv_b);
            g_sp = detail::scaled(std::move(cr.grad_sp), om[0] * inv_b);
        }

        Tensor gd_s, gd_ps, gd_sp;
        if (use_disc) {
            Discriminator::Cache c_p, c_s, c_ps, c_sp;
            const Tensor d_p = st.disc.net.forward(disc_input(cfg, m_p, z_p), &c_p);
            const Tensor d_s = st.disc.net.forward(disc_input(cfg, m_s, z_s), &c_s);
            const Shape ps = d_p.shape();
            // Without the swap only the real map and m_s reach the discriminator.
            Tensor d_ps = sw.cma ? st.disc.net.forward(disc_input(cfg, m_ps, z_ps), &c_ps) : Tensor(ps, 0.5);
            Tensor d_sp = sw.cma ? st.disc.net.forward(disc_input(cfg, m_sp, z_sp), &c_sp) : Tensor(ps, 0.5);
            std::array<Real, 4> lw = lam;
            if (!sw.cma) lw[1] = lw[2] = 0.0;
            DiscriminatorLoss dl = loss_discriminator(d_p, d_sp, d_ps, d_s, lw);
            l.disc = dl.value;

            AdversarialLoss adv = loss_adversarial(d_sp, d_ps, d_s);
            l.adv = sw.cma ? adv.value : loss_adversarial_term(d_s).value;

            // Gradients into the model through the current discriminator
            // (no parameter accumulation), taken before D changes.
            gd_s = st.disc.net.backward(detail::scaled(adv.grad_s, om[3] * inv_b), c_s, false, true);
            if (sw.cma) {
                gd_ps = st.disc.net.backward(detail::scaled(adv.grad_ps, om[3] * inv_b), c_ps, false, true);
                gd_sp = st.disc.net.backward(detail::scaled(adv.grad_sp, om[3] * inv_b), c_sp, false, true);
            }
            // Discriminator parameter gradients from L_D; fakes are detached.
            st.disc.net.backward(detail::scaled(dl.grad_p, inv_b), c_p, true, false);
            st.disc.net.backward(detail::scaled(dl.grad_s, inv_b), c_s, true, false);
            if (sw.cma) {
                st.disc.net.backward(detail::scaled(dl.grad_ps, inv_b), c_ps, true, false);
                st.disc.net.backward(detail::scaled(dl.grad_sp, inv_b), c_sp, true, false);
            }
        }
        l.seg = loss_seg(l, om);
        detail::check_finite(l);

        // Model backward.
        Tensor df_s = st.model.segmentor.backward(logits_grad(cfg, std::move(g_s), gd_s, m_s), s_cache, true, true);
        if (sw.cma) {
            st.model.segmentor.backward(logits_grad(cfg, std::move(g_ps), gd_ps, m_ps), ps_cache, true, false);
            df_s += st.prior.segmentor.backward(logits_grad(cfg, std::move(g_sp), gd_sp, m_sp), sp_cache, false, true);
        }
        Tensor df = sw.ia ? inheritance_attention_backward(st.model.fusion, df_s, ia_cache, true) : std::move(df_s);
        st.model.backbone.backward(std::move(df), bb_cache, true, false);

        total.cross += l.cross * inv_b;
        total.seen += l.seen * inv_b;
        total.bg += l.bg * inv_b;
        total.adv += l.adv * inv_b;
        total.disc += l.disc * inv_b;
    }
    total.seg = loss_seg(total, om);
    return total;
}

// One iteration: everything is computed once with the current weights; the
// discriminator is stepped first, then the zero-shot model with gradients
// taken through the pre-update discriminator.
inline LossBundle stage2_step(TrainState& st, const Batch& batch) {
    const LossBundle total = stage2_gradients(st, batch);
    if (st.setup.switches.rpa) st.disc_opt.step(st.disc);
    auto params = st.model_params();
    if (st.opt.grad_clip > 0.0) clip_grad_norm(params, st.opt.grad_clip);
    st.model_opt.step(params);
    ++st.step;
    return total;
}

struct ZeroShotResult {
    SegmentationNet model;
    DiscriminatorNet disc;
    std::vector<HistoryRow> history;
};

using CheckpointHook = std::function<void(const TrainState&, int epoch)>;

inline Real poly_lr(Real base, Real power, std::int64_t step, std::int64_t total) {
    if (total <= 0) return base;
    const Real frac = std::min<Real>(1.0, static_cast<Real>(step) / static_cast<Real>(total));
    return base * std::pow(1.0 - frac, power);
}

// Runs epochs x ceil(N / batch) steps over the target training split.
inline ZeroShotResult train_zeroshot(const DatasetBundle& data, const SegmentationNet& prior,
                                     const AblationSetup& setup, const OptimizerConfig& opt, std::uint64_t seed,
                                     const CheckpointHook& hook = {}) {
    if (data.train.empty()) throw std::invalid_argument("train_zeroshot: empty training split");
    if (data.seen().empty()) throw std::invalid_argument("train_zeroshot: no seen classes");
    if (opt.epochs < 0 || opt.batch_size < 1) throw std::invalid_argument("train_zeroshot: bad epochs/batch size");
    TrainState st = make_train_state(prior, setup, opt, seed);
    std::vector<SeenLabels> labels;
    for (auto i : data.train) labels.push_back(data.seen_labels(i));
    std::vector<std::size_t> order(data.train.size());
    Rng rng = Rng::derive(seed, 0xBA7C);
    const auto n = static_cast<std::int64_t>(order.size());
    const std::int64_t per_epoch = (n + opt.batch_size - 1) / opt.batch_size;
    const std::int64_t total_steps = per_epoch * opt.epochs;
    std::vector<HistoryRow> history;
    for (int e = 0; e < opt.epochs; ++e) {
        st.epoch = e;
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order.begin(), order.end());
        for (std::int64_t s = 0; s < n; s += opt.batch_size) {
            Batch batch;
            for (std::int64_t k = s; k < std::min(n, s + opt.batch_size); ++k) {
                batch.images.push_back(&data.mirror[data.train[order[k]]].image);
                batch.labels.push_back(labels[order[k]]);
            }
            if (opt.poly_decay) {
                st.model_opt.set_lr(poly_lr(opt.model.lr, opt.poly_power, st.step, total_steps));
                st.disc_opt.set_lr(poly_lr(opt.disc.lr, opt.poly_power, st.step, total_steps));
            }
            const std::int64_t step = st.step;
            LossBundle l = stage2_step(st, batch);
            history.push_back({step, e, l});
        }
        if (hook && opt.checkpoint_every > 0 && ((e + 1) % opt.checkpoint_every == 0 || e + 1 == opt.epochs))
            hook(st, e + 1);
    }
    return {std::move(st.model), std::move(st.disc), std::move(history)};
}

struct PriorResult {
    SegmentationNet model;
    std::vector<Real> loss;  // one entry per step
};

// Fully supervised cross-entropy training on (image, full label) pairs.
// Used for the prior (Modality A) and for the Oracle (Modality B).
inline PriorResult train_supervised(const std::vector<const LabeledSample*>& samples, const NetworkConfig& net_cfg,
                                    const PriorConfig& cfg) {
    if (samples.empty()) throw std::invalid_argument("train_supervised: no samples");
    if (cfg.epochs < 0 || cfg.batch_size < 1) throw std::invalid_argument("train_supervised: bad epochs/batch size");
    PriorResult r{SegmentationNet(net_cfg), {}};
    Rng init = Rng::derive(cfg.seed, 0x1417);
    r.model.init(init);
    Sgd opt(cfg.sgd);
    ModelParams params{&r.model, false};
    Rng rng = Rng::derive(cfg.seed, 0xBA7C);
    std::vector<std::size_t> order(samples.size());
    const auto n = static_cast<std::int64_t>(samples.size());
    for (int e = 0; e < cfg.epochs; ++e) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order.begin(), order.end());
        for (std::int64_t s = 0; s < n; s += cfg.batch_size) {
            const std::int64_t end = std::min(n, s + cfg.batch_size);
            const Real inv_b = 1.0 / static_cast<Real>(end - s);
            zero_grad(r.model);
            Real loss = 0.0;
            for (std::int64_t k = s; k < end; ++k) {
                const LabeledSample& smp = *samples[order[k]];
                if (smp.label.num_classes() != net_cfg.num_classes)
                    throw ShapeError("train_supervised: label classes do not match network");
                Backbone::Cache bc;
                Segmentor::Cache sc;
                const Tensor f = r.model.backbone.forward(smp.image, &bc);
                const Tensor p = softmax_channels(r.model.segmentor.forward(f, &sc));
                LossGrad lg = loss_stage1(p, smp.label.grid);
                loss += lg.value * inv_b;
                lg.grad *= inv_b;
                Tensor df = r.model.segmentor.backward(softmax_backward(lg.grad, p), sc, true, true);
                r.model.backbone.backward(std::move(df), bc, true, false);
            }
            if (!std::isfinite(loss))
                throw DivergenceError("train_supervised: loss became non-finite at epoch " + std::to_string(e));
            opt.step(params);
            r.loss.push_back(loss);
        }
    }
    return r;
}

inline PriorResult train_prior(const DatasetBundle& data, const NetworkConfig& net_cfg, const PriorConfig& cfg) {
    std::vector<const LabeledSample*> s;
    for (const auto& x : data.prior) s.push_back(&x);
    return train_supervised(s, net_cfg, cfg);
}

// Upper-bound reference: supervised on the fully labelled target training split.
inline PriorResult train_oracle(const DatasetBundle& data, const NetworkConfig& net_cfg, const PriorConfig& cfg) {
    std::vector<const LabeledSample*> s;
    for (auto i : data.train) s.push_back(&data.mirror[i]);
    return train_supervised(s, net_cfg, cfg);
}

// (m_ps, m_sp) = (S(f_p), S_p(f_s)) as logits.
inline std::pair<Tensor, Tensor> cma_swap(const Tensor& f_p, const Tensor& f_s, const Segmentor& zero_shot,
                                          const Segmentor& prior) {
    expect_shape(f_s.shape(), f_p.shape(), "cma_swap");
    return {zero_shot.forward(f_p), prior.forward(f_s)};
}

// Per-pixel argmax of the model prediction; the prior supplies the guidance
// map when inheritance attention is enabled.
inline std::vector<std::uint8_t> predict_labels(const SegmentationNet& model, const SegmentationNet* prior,
                                                bool use_attention, const Tensor& image) {
    Tensor logits;
    if (use_attention) {
        if (!prior) throw std::invalid_argument("predict_labels: attention needs the prior model");
        const Tensor g = inheritance_guidance(softmax_channels(prior->predict(image)));
        logits = model.predict(image, &g);
    } else {
        logits = model.predict(image);
    }
    const std::size_t plane = logits.shape().plane();
    std::vector<std::uint8_t> out(plane, 0);
    for (std::size_t i = 0; i < plane; ++i) {
        int best = 0;
        for (int c = 1; c < logits.channels(); ++c)
            if (logits[c * plane + i] > logits[best * plane + i]) best = c;
        out[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

}  // namespace zsseg

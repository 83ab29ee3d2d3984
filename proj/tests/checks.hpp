#pragma once

// Property suites shared by the acceptance binary: hand-computed loss values,
// finite-difference gradients and structural invariants.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "zsseg/checkpoint.hpp"
#include "zsseg/losses.hpp"
#include "zsseg/metrics.hpp"
#include "zsseg/nets.hpp"
#include "zsseg/training.hpp"

namespace checks {

using namespace zsseg;

struct Check {
    std::string name;
    Real measured = 0.0;
    Real bound = 0.0;
    bool ok = false;
};

inline Check near(const std::string& name, Real got, Real want, Real tol) {
    const Real d = std::abs(got - want);
    return {name, d, tol, d < tol};
}

inline Check below(const std::string& name, Real got, Real bound) { return {name, got, bound, got < bound}; }

inline Check holds(const std::string& name, bool ok) { return {name, ok ? 0.0 : 1.0, 0.5, ok}; }

inline Tensor t1(std::initializer_list<Real> v) {
    Tensor t(static_cast<int>(v.size()), 1, 1);
    std::copy(v.begin(), v.end(), t.data());
    return t;
}

inline Tensor scalar(Real v) { return Tensor(Shape{1, 1, 1}, v); }

// ---------------------------------------------------------------------------
// Hand-arithmetic loss values (frozen closed forms, log(x + 1e-8)).

inline std::vector<Check> loss_values() {
    std::vector<Check> out;
    out.push_back(near("stage1 y=(1,0) m=(.5,.5)", loss_stage1(t1({0.5, 0.5}), t1({1, 0})).value, 0.3465735802799727, 1e-6));
    const SeenLabels one{scalar(1.0), {1}};
    const Tensor half = t1({0.5, 0.5});
    out.push_back(near("cross both .5", loss_cross(half, half, one).value, 1.3862943211198908, 1e-6));
    out.push_back(near("seen .5", loss_seen(half, one).value, 0.6931471605599454, 1e-6));
    Tensor m(2, 1, 2);
    m(0, 0, 0) = 0.75, m(1, 0, 0) = 0.25, m(0, 0, 1) = 0.25, m(1, 0, 1) = 0.75;
    Tensor y(1, 1, 2);
    y(0, 0, 0) = 1.0;
    out.push_back(near("bg (1,0) vs (.75,.25)", loss_bg(y, m).value, 0.0625, 1e-6));
    out.push_back(near("disc (.9,.2,.3,.1)",
                       loss_discriminator(scalar(0.9), scalar(0.2), scalar(0.3), scalar(0.1), {3, 1, 1, 1}).value,
                       1.0012604866540884, 1e-6));
    out.push_back(near("adv all .5", loss_adversarial(scalar(0.5), scalar(0.5), scalar(0.5)).value, 2.079441481679836,
                       1e-6));
    out.push_back(near("seg (2,1,1,1)", loss_seg(2, 1, 1, 1, {0.5, 1, 0.01, 1}), 3.01, 1e-6));

    // Brute-force equivalence on random maps.
    Rng rng(99);
    const Tensor p = gradcheck::random_probs({4, 4, 4}, rng);
    const Tensor q = gradcheck::random_probs({4, 4, 4}, rng);
    Tensor lab(4, 4, 4);
    Tensor ys(2, 4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const int c = static_cast<int>(rng.below(4));
            lab(c, i, j) = 1.0;
            if (c == 1) ys(0, i, j) = 1.0;
            if (c == 3) ys(1, i, j) = 1.0;
        }
    const SeenLabels sl{ys, {1, 3}};
    out.push_back(near("stage1 = oracle (random)", loss_stage1(p, lab).value, oracle::stage1(p, lab), 1e-10));
    out.push_back(near("seen = oracle (random)", loss_seen(p, sl).value, oracle::seen(p, ys, {1, 3}), 1e-10));
    out.push_back(near("cross = oracle (random)", loss_cross(p, q, sl).value, oracle::cross(p, q, ys, {1, 3}), 1e-10));
    const Tensor yb = oracle::pseudo_background(q);
    out.push_back(near("bg = oracle (random)", loss_bg(yb, p).value, oracle::bg(yb, p), 1e-10));
    Tensor d[4];
    for (auto& t : d) t = gradcheck::random_tensor({1, 3, 3}, rng, 0.05, 0.95);
    const Real lam[4] = {3, 1, 1, 1};
    out.push_back(near("disc = oracle (random)", loss_discriminator(d[0], d[1], d[2], d[3], {3, 1, 1, 1}).value,
                       oracle::disc(d[0], d[1], d[2], d[3], lam), 1e-10));
    out.push_back(near("adv = oracle (random)", loss_adversarial(d[1], d[2], d[3]).value,
                       oracle::adv(d[1], d[2], d[3]), 1e-10));

    // Limits and zeros.
    Tensor perfect(3, 2, 2);
    Tensor pys(2, 2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const int c = (i + j) % 3;
            perfect(c, i, j) = 1.0;
            if (c >= 1) pys(c - 1, i, j) = 1.0;
        }
    const SeenLabels ps{pys, {1, 2}};
    out.push_back(below("seen perfect = 0", loss_seen(perfect, ps).value, 1e-7));
    out.push_back(below("cross perfect = 0", loss_cross(perfect, perfect, ps).value, 1e-7));
    out.push_back(below("stage1 perfect = 0", loss_stage1(perfect, perfect).value, 1e-7));
    out.push_back(below("disc perfect limit ~ 0",
                        loss_discriminator(scalar(1 - 1e-9), scalar(1e-9), scalar(1e-9), scalar(1e-9), {3, 1, 1, 1}).value,
                        1e-6));
    out.push_back(below("adv fooled limit ~ 0", loss_adversarial(scalar(1 - 1e-9), scalar(1 - 1e-9), scalar(1 - 1e-9)).value,
                        1e-6));
    out.push_back(near("seg selector (0,1,0,0)", loss_seg(7, 2.5, 3, 4, {0, 1, 0, 0}), 2.5, 1e-15));
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradients (step 1e-4, relative error < 1e-3).

inline NetworkConfig tiny_config(int classes = 3) {
    NetworkConfig c;
    c.image_size = 8;
    c.num_classes = classes;
    c.feature_channels = 4;
    c.backbone_width = 3;
    c.segmentor_hidden = 4;
    c.fusion_hidden = 3;
    c.discriminator_widths = {3, 4, 4};
    return c;
}

// Random (non-zero) parameters everywhere, including M's output layer.
template <typename Net>
void randomize(Net& net, Rng& rng, Real scale = 0.5) {
    net.visit([&](Parameter& p) {
        for (auto& v : p.value) v = rng.uniform(-scale, scale);
    });
}

inline std::vector<Check> gradients() {
    using gradcheck::numeric;
    using gradcheck::random_probs;
    using gradcheck::random_tensor;
    using gradcheck::rel_error;
    constexpr Real tol = 1e-3;
    std::vector<Check> out;
    Rng rng(2024);

    // Losses with respect to their map inputs.
    const Shape ms{3, 3, 3};
    const Tensor p = random_probs(ms, rng), q = random_probs(ms, rng);
    Tensor lab(ms);
    Tensor ys(2, 3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const int c = static_cast<int>(rng.below(3));
            lab(c, i, j) = 1.0;
            if (c > 0) ys(c - 1, i, j) = 1.0;
        }
    const SeenLabels sl{ys, {1, 2}};
    out.push_back(below("d stage1/dm", rel_error(loss_stage1(p, lab).grad, numeric(p, [&](const Tensor& x) {
                                                     return loss_stage1(x, lab).value;
                                                 })),
                        tol));
    out.push_back(below("d seen/dm", rel_error(loss_seen(p, sl).grad, numeric(p, [&](const Tensor& x) {
                                                   return loss_seen(x, sl).value;
                                               })),
                        tol));
    const CrossLoss cl = loss_cross(p, q, sl);
    out.push_back(below("d cross/dm_ps", rel_error(cl.grad_ps, numeric(p, [&](const Tensor& x) {
                                                       return loss_cross(x, q, sl).value;
                                                   })),
                        tol));
    out.push_back(below("d cross/dm_sp", rel_error(cl.grad_sp, numeric(q, [&](const Tensor& x) {
                                                       return loss_cross(p, x, sl).value;
                                                   })),
                        tol));
    const Tensor yb = oracle::pseudo_background(q);
    out.push_back(below("d bg/dm", rel_error(loss_bg(yb, p).grad, numeric(p, [&](const Tensor& x) {
                                                 return loss_bg(yb, x).value;
                                             })),
                        tol));
    Tensor d[4];
    for (auto& t : d) t = random_tensor({1, 2, 2}, rng, 0.1, 0.9);
    const std::array<Real, 4> lam{3, 1, 1, 1};
    const DiscriminatorLoss dl = loss_discriminator(d[0], d[1], d[2], d[3], lam);
    const Tensor* dg[4] = {&dl.grad_p, &dl.grad_sp, &dl.grad_ps, &dl.grad_s};
    const char* dn[4] = {"d L_D/dd_p", "d L_D/dd_sp", "d L_D/dd_ps", "d L_D/dd_s"};
    for (int k = 0; k < 4; ++k)
        out.push_back(below(dn[k], rel_error(*dg[k], numeric(d[k], [&](const Tensor& x) {
                                                 Tensor e[4] = {d[0], d[1], d[2], d[3]};
                                                 e[k] = x;
                                                 return loss_discriminator(e[0], e[1], e[2], e[3], lam).value;
                                             })),
                            tol));
    const AdversarialLoss al = loss_adversarial(d[1], d[2], d[3]);
    const Tensor* ag[3] = {&al.grad_sp, &al.grad_ps, &al.grad_s};
    const char* an[3] = {"d L_Adv/dd_sp", "d L_Adv/dd_ps", "d L_Adv/dd_s"};
    for (int k = 0; k < 3; ++k)
        out.push_back(below(an[k], rel_error(*ag[k], numeric(d[k + 1], [&](const Tensor& x) {
                                                 Tensor e[3] = {d[1], d[2], d[3]};
                                                 e[k] = x;
                                                 return loss_adversarial(e[0], e[1], e[2]).value;
                                             })),
                            tol));

    // Softmax.
    const Tensor z = random_tensor({4, 3, 3}, rng, -2, 2);
    const Tensor r = random_tensor({4, 3, 3}, rng);
    const auto proj = [&](const Tensor& a) {
        Real s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * r[i];
        return s;
    };
    out.push_back(below("softmax", rel_error(softmax_backward(r, softmax_channels(z)),
                                             numeric(z, [&](const Tensor& x) { return proj(softmax_channels(x)); })),
                        tol));

    // Convolutions: input and parameter gradients.
    const ConvSpec specs[] = {{2, 3, 3, 1, 1, 1, true}, {2, 3, 3, 2, 1, 1, true}, {3, 2, 3, 1, 2, 2, false},
                              {3, 2, 4, 2, 1, 1, true}, {2, 2, 1, 1, 0, 1, true}};
    const char* sn[] = {"conv 3x3", "conv 3x3 s2", "conv 3x3 d2", "conv 4x4 s2", "conv 1x1"};
    for (int k = 0; k < 5; ++k) {
        Conv2d conv("c", specs[k]);
        auto v = gradcheck::wrap(conv);
        randomize(v, rng);
        const Tensor x = random_tensor({specs[k].in, 6, 6}, rng);
        ConvCache cache;
        const Tensor y = conv.forward(x, &cache);
        const Tensor ry = random_tensor(y.shape(), rng);
        const auto f = [&](const Tensor& in) {
            const Tensor o = conv.forward(in);
            Real s = 0;
            for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * ry[i];
            return s;
        };
        zero_grad(v);
        const Tensor dx = conv.backward(ry, cache, true, true);
        out.push_back(below(std::string(sn[k]) + " input", rel_error(dx, numeric(x, f)), tol));
        out.push_back(below(std::string(sn[k]) + " params", gradcheck::worst(gradcheck::check_params(v, [&] { return f(x); })), tol));
    }

    // Bilinear upsampling.
    {
        BilinearUpsample up(4);
        const Tensor x = random_tensor({2, 2, 2}, rng);
        const Tensor ry = random_tensor({2, 8, 8}, rng);
        out.push_back(below("bilinear x4", rel_error(up.backward(ry, x.shape()), numeric(x, [&](const Tensor& in) {
                                                         const Tensor o = up.forward(in);
                                                         Real s = 0;
                                                         for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * ry[i];
                                                         return s;
                                                     })),
                            tol));
    }

    // Network blocks on 8x8 inputs.
    const NetworkConfig cfg = tiny_config();
    {
        Backbone bb(cfg, "backbone");
        auto v = gradcheck::wrap(bb);
        randomize(v, rng);
        const Tensor x = random_tensor(cfg.image_shape(), rng);
        Backbone::Cache c;
        const Tensor f = bb.forward(x, &c);
        const Tensor rf = random_tensor(f.shape(), rng);
        const auto loss = [&](const Tensor& in) {
            const Tensor o = bb.forward(in);
            Real s = 0;
            for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * rf[i];
            return s;
        };
        zero_grad(v);
        const Tensor dx = bb.backward(rf, c, true, true);
        out.push_back(below("backbone input", rel_error(dx, numeric(x, loss)), tol));
        out.push_back(below("backbone params", gradcheck::worst(gradcheck::check_params(v, [&] { return loss(x); })), tol));
    }
    {
        Segmentor sg(cfg, "segmentor");
        auto v = gradcheck::wrap(sg);
        randomize(v, rng);
        const Tensor f = random_tensor(cfg.feature_shape(), rng);
        Segmentor::Cache c;
        const Tensor z0 = sg.forward(f, &c);
        // Mean output, as in the segmentor example.
        const auto loss = [&](const Tensor& in) { return zsseg::sum(sg.forward(in)) / static_cast<Real>(z0.size()); };
        zero_grad(v);
        const Tensor df = sg.backward(Tensor(z0.shape(), 1.0 / static_cast<Real>(z0.size())), c, true, true);
        out.push_back(below("segmentor input (mean output)", rel_error(df, numeric(f, loss)), tol));
        out.push_back(below("segmentor params", gradcheck::worst(gradcheck::check_params(v, [&] { return loss(f); })), tol));
    }
    {
        Fusion fu(cfg, "fusion");
        auto v = gradcheck::wrap(fu);
        randomize(v, rng);
        const Tensor f = random_tensor(cfg.feature_shape(), rng);
        const Tensor g = random_tensor({1, 8, 8}, rng, 0.05, 0.95);
        AttentionCache c;
        inheritance_attention(fu, f, g, &c);
        // Sum of the attended features.
        const auto loss = [&](const Tensor& in) { return zsseg::sum(inheritance_attention(fu, in, g)); };
        zero_grad(v);
        const Tensor df = inheritance_attention_backward(fu, Tensor(f.shape(), 1.0), c, true);
        out.push_back(below("attention input (sum output)", rel_error(df, numeric(f, loss)), tol));
        out.push_back(below("attention fusion params", gradcheck::worst(gradcheck::check_params(v, [&] { return loss(f); })), tol));
    }
    {
        Discriminator dnet(cfg, "discriminator");
        auto v = gradcheck::wrap(dnet);
        randomize(v, rng);
        const Tensor m = random_probs(cfg.score_shape(), rng);
        Discriminator::Cache c;
        const Tensor s = dnet.forward(m, &c);
        const Tensor rs = random_tensor(s.shape(), rng);
        const auto loss = [&](const Tensor& in) {
            const Tensor o = dnet.forward(in);
            Real t = 0;
            for (std::size_t i = 0; i < o.size(); ++i) t += o[i] * rs[i];
            return t;
        };
        zero_grad(v);
        const Tensor dm = dnet.backward(rs, c, true, true);
        out.push_back(below("discriminator input", rel_error(dm, numeric(m, loss)), tol));
        out.push_back(below("discriminator params", gradcheck::worst(gradcheck::check_params(v, [&] { return loss(m); })), tol));
    }

    // Whole inheritance step: dL_Seg/dθ and dL_D/dφ as left by stage2_gradients.
    for (char setting : {'a', 'b', 'c', 'd', 'e', 'f', 'g'}) {
        Rng r2(77 + setting);
        SegmentationNet prior(cfg);
        randomize(prior, r2);
        TrainState st = make_train_state(prior, configure_ablation(setting), OptimizerConfig{}, 5);
        randomize(st.model, r2);
        randomize(st.disc, r2, 0.3);
        Batch batch;
        const Tensor x1 = random_tensor(cfg.image_shape(), r2), x2 = random_tensor(cfg.image_shape(), r2);
        Tensor y1(2, 8, 8), y2(2, 8, 8);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) {
                y1(i < 4 ? 0 : 1, i, j) = (j % 3 == 0) ? 1.0 : 0.0;
                y2(j < 4 ? 0 : 1, i, j) = (i % 3 == 1) ? 1.0 : 0.0;
            }
        batch.images = {&x1, &x2};
        batch.labels = {SeenLabels{y1, {1, 2}}, SeenLabels{y2, {1, 2}}};
        stage2_gradients(st, batch);
        auto params = st.model_params();
        const std::string tag = std::string("stage-2 (") + setting + ") ";
        const auto seg = gradcheck::check_params(params, [&] { return stage2_gradients(st, batch).seg; }, 8);
        out.push_back(below(tag + "dL_Seg/dmodel", gradcheck::worst(seg), tol));
        out.push_back(below(tag + "dL_Seg kink-skipped fraction", gradcheck::skipped_fraction(seg), 0.1));
        if (st.setup.switches.rpa) {
            stage2_gradients(st, batch);
            const auto disc = gradcheck::check_params(st.disc, [&] { return stage2_gradients(st, batch).disc; }, 8);
            out.push_back(below(tag + "dL_D/ddisc", gradcheck::worst(disc), tol));
            out.push_back(below(tag + "dL_D kink-skipped fraction", gradcheck::skipped_fraction(disc), 0.1));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Invariants.

inline std::vector<Check> invariants() {
    std::vector<Check> out;
    Rng rng(31337);

    // One-hot labels over many generated and augmented maps.
    const Layout layout = Layout::standard();
    bool onehot = true, nonempty = true;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const LabelMap m = generate_anatomy(s, layout);
        const LabeledSample a = augment({normalize(render_modality(m, default_profile_a(), s)), m}, s + 1000);
        for (const LabelMap* lm : {&m, &a.label})
            for (int i = 0; i < lm->height(); ++i)
                for (int j = 0; j < lm->width(); ++j) {
                    Real sum = 0;
                    for (int c = 0; c < lm->num_classes(); ++c) {
                        const Real v = lm->grid(c, i, j);
                        if (v != 0.0 && v != 1.0) onehot = false;
                        sum += v;
                    }
                    if (sum != 1.0) onehot = false;
                }
        for (int c = 0; c < m.num_classes(); ++c) {
            Real t = 0;
            for (Real v : m.grid.channel(c)) t += v;
            if (t < 1.0) nonempty = false;
        }
    }
    out.push_back(holds("one-hot labels (100 maps + augmentations)", onehot));
    out.push_back(holds("every class present in every map", nonempty));

    // ProbMap normalisation.
    {
        const Tensor z = gradcheck::random_tensor({5, 16, 16}, rng, -30, 30);
        const Tensor p = softmax_channels(z);
        Real worst = 0;
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j) {
                Real s = 0;
                for (int c = 0; c < 5; ++c) s += p(c, i, j);
                worst = std::max(worst, std::abs(s - 1.0));
            }
        out.push_back(below("softmax rows sum to 1", worst, 1e-5));
        const Tensor zs = gradcheck::random_tensor({5, 4, 4}, rng, -3, 3);
        out.push_back(below("softmax = oracle", max_abs_diff(softmax_channels(zs), oracle::softmax(zs)), 1e-12));
    }

    // Guidance map against the brute-force definition.
    {
        const Tensor p = gradcheck::random_probs({5, 16, 16}, rng);
        out.push_back(below("guidance = brute force", max_abs_diff(inheritance_guidance(p), oracle::guidance(p)), 1e-7));
    }

    // IA residual identity with a zeroed fusion output layer.
    {
        const NetworkConfig cfg = tiny_config();
        Fusion fu(cfg, "fusion");
        Rng r(4);
        fu.init(r);
        fu.output_layer().init_zero();
        const Tensor f = gradcheck::random_tensor(cfg.feature_shape(), rng);
        const Tensor g = gradcheck::random_tensor({1, 8, 8}, rng, 0.01, 0.99);
        out.push_back(holds("attention with zero output layer returns f bitwise", inheritance_attention(fu, f, g) == f));
    }

    // Prior parameters frozen across stage-2 steps.
    {
        const NetworkConfig cfg = tiny_config();
        SegmentationNet prior(cfg);
        Rng r(8);
        prior.init(r);
        TrainState st = make_train_state(prior, configure_ablation('g'), OptimizerConfig{}, 3);
        const auto before = parameter_hash(st.prior);
        const auto disc_before = parameter_hash(st.disc);
        const auto model_before = parameter_hash(st.model);
        const Tensor x = gradcheck::random_tensor(cfg.image_shape(), rng);
        Tensor y(2, 8, 8);
        for (int i = 0; i < 8; ++i) y(i < 4 ? 0 : 1, i, i) = 1.0;
        Batch b{{&x}, {SeenLabels{y, {1, 2}}}};
        for (int k = 0; k < 3; ++k) stage2_step(st, b);
        out.push_back(holds("prior hash unchanged after 3 steps", parameter_hash(st.prior) == before));
        out.push_back(holds("discriminator and model change", parameter_hash(st.disc) != disc_before &&
                                                                  parameter_hash(st.model) != model_before));
    }

    // Argmax masks partition the image.
    {
        const NetworkConfig cfg = tiny_config(5);
        SegmentationNet net(cfg);
        Rng r(12);
        net.init(r);
        const Tensor x = gradcheck::random_tensor(cfg.image_shape(), rng);
        const auto lab = predict_labels(net, nullptr, false, x);
        bool part = true;
        for (std::size_t i = 0; i < lab.size(); ++i) {
            int hits = 0;
            for (int c = 0; c < 5; ++c) hits += class_mask(lab, c)[i];
            part = part && hits == 1;
        }
        out.push_back(holds("argmax masks are exclusive and exhaustive", part));
    }

    // Dice / ASSD symmetry and oracle equality on random masks.
    {
        Real dice_sym = 0, assd_sym = 0, dice_or = 0, assd_or = 0;
        bool defined_match = true;
        for (int t = 0; t < 60; ++t) {
            const int h = 6 + static_cast<int>(rng.below(12)), w = 6 + static_cast<int>(rng.below(12));
            Mask a(static_cast<std::size_t>(h) * w), b(a.size());
            const Real pa = rng.uniform(0.0, 0.6), pb = rng.uniform(0.0, 0.6);
            for (std::size_t i = 0; i < a.size(); ++i) {
                a[i] = rng.bernoulli(pa);
                b[i] = rng.bernoulli(pb);
            }
            const Spacing sp{rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)};
            dice_sym = std::max(dice_sym, std::abs(dice(a, b) - dice(b, a)));
            dice_or = std::max(dice_or, std::abs(dice(a, b) - oracle::dice(a, b)));
            const auto ab = assd(a, b, h, w, sp), ba = assd(b, a, h, w, sp);
            const auto ob = oracle::assd(a, b, h, w, sp.y, sp.x);
            if (ab.has_value() != ob.has_value() || ab.has_value() != ba.has_value()) defined_match = false;
            if (ab && ba && ob) {
                assd_sym = std::max(assd_sym, std::abs(*ab - *ba));
                assd_or = std::max(assd_or, std::abs(*ab - *ob));
            }
        }
        out.push_back(below("dice symmetric", dice_sym, 1e-12));
        out.push_back(below("dice = oracle", dice_or, 1e-12));
        out.push_back(below("assd symmetric", assd_sym, 1e-9));
        out.push_back(below("assd = all-pairs oracle", assd_or, 1e-9));
        out.push_back(holds("assd undefined exactly when a boundary is empty", defined_match));
    }
    return out;
}

}  // namespace checks

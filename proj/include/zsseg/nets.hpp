#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "zsseg/layers.hpp"
#include "zsseg/rng.hpp"
#include "zsseg/tensor.hpp"

namespace zsseg {

enum class DiscriminatorInput { probabilities, logits };

struct NetworkConfig {
    int image_size = 64;       // W = H
    int num_classes = 5;       // C, background included
    int feature_channels = 32; // C_f
    int backbone_width = 16;   // channels after the first stride-2 block
    int segmentor_hidden = 32;
    int fusion_hidden = 16;
    std::array<int, 3> discriminator_widths{16, 32, 32};
    Real discriminator_slope = 0.2;
    bool use_bias = true;
    DiscriminatorInput disc_input = DiscriminatorInput::probabilities;
    std::uint64_t init_seed = 1;

    static constexpr int feature_stride = 4;
    static constexpr int discriminator_stride = 8;

    [[nodiscard]] int feature_size() const { return image_size / feature_stride; }
    [[nodiscard]] Shape image_shape() const { return {1, image_size, image_size}; }
    [[nodiscard]] Shape feature_shape() const {
        return {feature_channels, feature_size(), feature_size()};
    }
    [[nodiscard]] Shape score_shape() const { return {num_classes, image_size, image_size}; }
    [[nodiscard]] Shape patch_shape() const {
        return {1, image_size / discriminator_stride, image_size / discriminator_stride};
    }

    void validate() const {
        if (image_size <= 0 || image_size % discriminator_stride != 0)
            throw std::invalid_argument("image_size must be a positive multiple of 8");
        if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
        if (feature_channels <= 0 || backbone_width <= 0 || segmentor_hidden <= 0 ||
            fusion_hidden <= 0)
            throw std::invalid_argument("layer widths must be positive");
        for (int w : discriminator_widths)
            if (w <= 0) throw std::invalid_argument("discriminator widths must be positive");
    }

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// Feature extractor: two stride-2 blocks followed by a dilated context block
// (dilation 2 then 4) so the receptive field spans most of a 64 x 64 image.
class Backbone {
public:
    struct Cache {
        std::array<ConvCache, 4> conv;
        std::array<Tensor, 4> act;
    };

    Backbone() = default;
    Backbone(const NetworkConfig& cfg, const std::string& prefix)
        : conv_{Conv2d(prefix + ".conv1", {1, cfg.backbone_width, 3, 2, 1, 1, cfg.use_bias}),
                Conv2d(prefix + ".conv2",
                       {cfg.backbone_width, cfg.feature_channels, 3, 2, 1, 1, cfg.use_bias}),
                Conv2d(prefix + ".conv3",
                       {cfg.feature_channels, cfg.feature_channels, 3, 1, 2, 2, cfg.use_bias}),
                Conv2d(prefix + ".conv4",
                       {cfg.feature_channels, cfg.feature_channels, 3, 1, 4, 4, cfg.use_bias})},
          input_(cfg.image_shape()) {}

    void init(Rng& rng) {
        for (auto& c : conv_) c.init_fan_in(rng, std::sqrt(2.0));
    }

    Tensor forward(const Tensor& image, Cache* cache = nullptr) const {
        expect_shape(image.shape(), input_, "backbone input");
        Tensor h = image;
        for (std::size_t i = 0; i < conv_.size(); ++i) {
            h = leaky_relu(conv_[i].forward(h, cache ? &cache->conv[i] : nullptr));
            if (cache) cache->act[i] = h;
        }
        return h;
    }

    Tensor backward(Tensor grad, const Cache& cache, bool accumulate, bool want_input_grad) {
        for (std::size_t i = conv_.size(); i-- > 0;) {
            grad = leaky_relu_backward(std::move(grad), cache.act[i]);
            grad = conv_[i].backward(grad, cache.conv[i], accumulate, i > 0 || want_input_grad);
        }
        return grad;
    }

    template <typename Fn>
    void visit(Fn&& fn) {
        for (auto& c : conv_) c.visit(fn);
    }
    template <typename Fn>
    void visit(Fn&& fn) const {
        for (const auto& c : conv_) c.visit(fn);
    }

private:
    std::array<Conv2d, 4> conv_;
    Shape input_{};
};

// Pixel classifier: 1x1 conv, ReLU, 1x1 conv to C logits, bilinear x4.
class Segmentor {
public:
    struct Cache {
        ConvCache hidden_conv, out_conv;
        Tensor hidden;
        Shape coarse{};
    };

    Segmentor() = default;
    Segmentor(const NetworkConfig& cfg, const std::string& prefix)
        : hidden_(prefix + ".conv1",
                  {cfg.feature_channels, cfg.segmentor_hidden, 1, 1, 0, 1, cfg.use_bias}),
          out_(prefix + ".conv2", {cfg.segmentor_hidden, cfg.num_classes, 1, 1, 0, 1, cfg.use_bias}),
          up_(NetworkConfig::feature_stride),
          input_(cfg.feature_shape()) {}

    void init(Rng& rng) {
        hidden_.init_fan_in(rng, std::sqrt(2.0));
        out_.init_fan_in(rng, std::sqrt(2.0));
    }

    Tensor forward(const Tensor& feature, Cache* cache = nullptr) const {
        expect_shape(feature.shape(), input_, "segmentor input");
        Tensor h = leaky_relu(hidden_.forward(feature, cache ? &cache->hidden_conv : nullptr));
        Tensor coarse = out_.forward(h, cache ? &cache->out_conv : nullptr);
        if (cache) {
            cache->hidden = h;
            cache->coarse = coarse.shape();
        }
        return up_.forward(coarse);
    }

    Tensor backward(const Tensor& grad_scores, const Cache& cache, bool accumulate,
                    bool want_input_grad) {
        Tensor g = up_.backward(grad_scores, cache.coarse);
        g = out_.backward(g, cache.out_conv, accumulate, true);
        g = leaky_relu_backward(std::move(g), cache.hidden);
        return hidden_.backward(g, cache.hidden_conv, accumulate, want_input_grad);
    }

    template <typename Fn>
    void visit(Fn&& fn) {
        hidden_.visit(fn);
        out_.visit(fn);
    }
    template <typename Fn>
    void visit(Fn&& fn) const {
        hidden_.visit(fn);
        out_.visit(fn);
    }

private:
    Conv2d hidden_, out_;
    BilinearUpsample up_{4};
    Shape input_{};
};

// Fusion function M of the inheritance-attention block: three 3x3 convs; the
// last one is linear and bias-free, zero-initialised so M starts at 0.
class Fusion {
public:
    struct Cache {
        std::array<ConvCache, 3> conv;
        std::array<Tensor, 2> act;
    };

    Fusion() = default;
    Fusion(const NetworkConfig& cfg, const std::string& prefix)
        : conv_{Conv2d(prefix + ".conv1",
                       {cfg.feature_channels, cfg.fusion_hidden, 3, 1, 1, 1, cfg.use_bias}),
                Conv2d(prefix + ".conv2",
                       {cfg.fusion_hidden, cfg.fusion_hidden, 3, 1, 1, 1, cfg.use_bias}),
                Conv2d(prefix + ".conv3",
                       {cfg.fusion_hidden, cfg.feature_channels, 3, 1, 1, 1, false})},
          input_(cfg.feature_shape()) {}

    void init(Rng& rng) {
        conv_[0].init_fan_in(rng, std::sqrt(2.0));
        conv_[1].init_fan_in(rng, std::sqrt(2.0));
        conv_[2].init_zero();
    }

    Tensor forward(const Tensor& x, Cache* cache = nullptr) const {
        expect_shape(x.shape(), input_, "fusion input");
        Tensor h = x;
        for (std::size_t i = 0; i < 2; ++i) {
            h = leaky_relu(conv_[i].forward(h, cache ? &cache->conv[i] : nullptr));
            if (cache) cache->act[i] = h;
        }
        return conv_[2].forward(h, cache ? &cache->conv[2] : nullptr);
    }

    Tensor backward(const Tensor& grad, const Cache& cache, bool accumulate, bool want_input_grad) {
        Tensor g = conv_[2].backward(grad, cache.conv[2], accumulate, true);
        for (std::size_t i = 2; i-- > 0;) {
            g = leaky_relu_backward(std::move(g), cache.act[i]);
            g = conv_[i].backward(g, cache.conv[i], accumulate, i > 0 || want_input_grad);
        }
        return g;
    }

    Conv2d& output_layer() { return conv_[2]; }

    template <typename Fn>
    void visit(Fn&& fn) {
        for (auto& c : conv_) c.visit(fn);
    }
    template <typename Fn>
    void visit(Fn&& fn) const {
        for (const auto& c : conv_) c.visit(fn);
    }

private:
    std::array<Conv2d, 3> conv_;
    Shape input_{};
};

// PatchGAN-style discriminator: three 4x4 stride-2 convs with leaky ReLU,
// a 3x3 conv to one channel, then a sigmoid.  64x64 input -> 8x8 scores.
class Discriminator {
public:
    struct Cache {
        std::array<ConvCache, 4> conv;
        std::array<Tensor, 3> act;
        Tensor scores;
    };

    Discriminator() = default;
    Discriminator(const NetworkConfig& cfg, const std::string& prefix)
        : conv_{Conv2d(prefix + ".conv1",
                       {cfg.num_classes, cfg.discriminator_widths[0], 4, 2, 1, 1, cfg.use_bias}),
                Conv2d(prefix + ".conv2", {cfg.discriminator_widths[0],
                                           cfg.discriminator_widths[1], 4, 2, 1, 1, cfg.use_bias}),
                Conv2d(prefix + ".conv3", {cfg.discriminator_widths[1],
                                           cfg.discriminator_widths[2], 4, 2, 1, 1, cfg.use_bias}),
                Conv2d(prefix + ".conv4",
                       {cfg.discriminator_widths[2], 1, 3, 1, 1, 1, cfg.use_bias})},
          slope_(cfg.discriminator_slope),
          input_(cfg.score_shape()) {}

    void init(Rng& rng) {
        const Real gain = std::sqrt(2.0 / (1.0 + slope_ * slope_));
        for (std::size_t i = 0; i < 3; ++i) conv_[i].init_fan_in(rng, gain);
        conv_[3].init_fan_in(rng, 1.0);
    }

    // Returns patch scores in (0, 1).
    Tensor forward(const Tensor& maps, Cache* cache = nullptr) const {
        expect_shape(maps.shape(), input_, "discriminator input");
        Tensor h = maps;
        for (std::size_t i = 0; i < 3; ++i) {
            h = leaky_relu(conv_[i].forward(h, cache ? &cache->conv[i] : nullptr), slope_);
            if (cache) cache->act[i] = h;
        }
        Tensor s = conv_[3].forward(h, cache ? &cache->conv[3] : nullptr);
        for (auto& v : s.values()) v = sigmoid(v);
        if (cache) cache->scores = s;
        return s;
    }

    // grad is dL/d(score); returns dL/d(maps) when requested.
    Tensor backward(Tensor grad, const Cache& cache, bool accumulate, bool want_input_grad) {
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const Real s = cache.scores[i];
            grad[i] *= s * (1.0 - s);
        }
        grad = conv_[3].backward(grad, cache.conv[3], accumulate, true);
        for (std::size_t i = 3; i-- > 0;) {
            grad = leaky_relu_backward(std::move(grad), cache.act[i], slope_);
            grad = conv_[i].backward(grad, cache.conv[i], accumulate, i > 0 || want_input_grad);
        }
        return grad;
    }

    template <typename Fn>
    void visit(Fn&& fn) {
        for (auto& c : conv_) c.visit(fn);
    }
    template <typename Fn>
    void visit(Fn&& fn) const {
        for (const auto& c : conv_) c.visit(fn);
    }

private:
    std::array<Conv2d, 4> conv_;
    Real slope_ = 0.2;
    Shape input_{};
};

// Channel-wise softmax of a score map.
inline Tensor softmax_channels(const Tensor& logits) {
    Tensor p(logits.shape());
    const int C = logits.channels();
    const std::size_t plane = logits.shape().plane();
    for (std::size_t i = 0; i < plane; ++i) {
        Real top = logits[i];
        for (int c = 1; c < C; ++c) top = std::max(top, logits[c * plane + i]);
        Real z = 0.0;
        for (int c = 0; c < C; ++c) {
            const Real e = std::exp(logits[c * plane + i] - top);
            p[c * plane + i] = e;
            z += e;
        }
        for (int c = 0; c < C; ++c) p[c * plane + i] /= z;
    }
    return p;
}

// dL/dlogits from dL/dprobs: p_c (g_c - sum_k p_k g_k).
inline Tensor softmax_backward(const Tensor& grad_probs, const Tensor& probs) {
    expect_shape(grad_probs.shape(), probs.shape(), "softmax_backward");
    Tensor g(probs.shape());
    const int C = probs.channels();
    const std::size_t plane = probs.shape().plane();
    for (std::size_t i = 0; i < plane; ++i) {
        Real dot = 0.0;
        for (int c = 0; c < C; ++c) dot += probs[c * plane + i] * grad_probs[c * plane + i];
        for (int c = 0; c < C; ++c)
            g[c * plane + i] = probs[c * plane + i] * (grad_probs[c * plane + i] - dot);
    }
    return g;
}

// Inheritance guidance: per-pixel max over the non-background channels of
// the prior's probabilities.  Channel 0 is background.
inline Tensor inheritance_guidance(const Tensor& prior_probs) {
    if (prior_probs.channels() < 2)
        throw ShapeError("inheritance_guidance: need background plus at least one class");
    const Shape s = prior_probs.shape();
    Tensor g(1, s.height, s.width);
    const std::size_t plane = s.plane();
    for (std::size_t i = 0; i < plane; ++i) {
        Real m = prior_probs[plane + i];
        for (int c = 2; c < s.channels; ++c) m = std::max(m, prior_probs[c * plane + i]);
        g[i] = m;
    }
    return g;
}

struct AttentionCache {
    Tensor gate;  // guidance pooled to the feature grid
    Tensor gated;
    Fusion::Cache fusion;
};

// f_s = M(g * f) + f, with g average-pooled from image to feature resolution.
inline Tensor inheritance_attention(const Fusion& fusion, const Tensor& feature,
                                    const Tensor& guidance, AttentionCache* cache = nullptr) {
    if (guidance.channels() != 1) throw ShapeError("inheritance_attention: guidance must have 1 channel");
    if (guidance.height() % feature.height() != 0 || guidance.width() % feature.width() != 0 ||
        guidance.height() / feature.height() != guidance.width() / feature.width())
        throw ShapeError("inheritance_attention: guidance " + to_string(guidance.shape()) +
                         " cannot be pooled to feature " + to_string(feature.shape()));
    Tensor gate = average_pool(guidance, guidance.height() / feature.height());
    Tensor gated(feature.shape());
    const std::size_t plane = feature.shape().plane();
    for (int c = 0; c < feature.channels(); ++c)
        for (std::size_t i = 0; i < plane; ++i) gated[c * plane + i] = gate[i] * feature[c * plane + i];
    Tensor out = fusion.forward(gated, cache ? &cache->fusion : nullptr);
    out += feature;
    if (cache) {
        cache->gate = std::move(gate);
        cache->gated = std::move(gated);
    }
    return out;
}

// Returns dL/df; fusion parameter gradients accumulate when requested.
inline Tensor inheritance_attention_backward(Fusion& fusion, const Tensor& grad_out,
                                             const AttentionCache& cache, bool accumulate) {
    Tensor g = fusion.backward(grad_out, cache.fusion, accumulate, true);
    const std::size_t plane = grad_out.shape().plane();
    Tensor df = grad_out;
    for (int c = 0; c < grad_out.channels(); ++c)
        for (std::size_t i = 0; i < plane; ++i) df[c * plane + i] += cache.gate[i] * g[c * plane + i];
    return df;
}

// Backbone + segmentor.  Used for the prior model and, with `fusion`, for the
// zero-shot model.
struct SegmentationNet {
    NetworkConfig config;
    Backbone backbone;
    Segmentor segmentor;
    Fusion fusion;

    SegmentationNet() = default;
    explicit SegmentationNet(const NetworkConfig& cfg)
        : config(cfg), backbone(cfg, "backbone"), segmentor(cfg, "segmentor"), fusion(cfg, "fusion") {
        cfg.validate();
    }

    void init(Rng& rng) {
        backbone.init(rng);
        segmentor.init(rng);
        fusion.init(rng);
    }

    template <typename Fn>
    void visit(Fn&& fn) {
        backbone.visit(fn);
        segmentor.visit(fn);
        fusion.visit(fn);
    }
    template <typename Fn>
    void visit(Fn&& fn) const {
        backbone.visit(fn);
        segmentor.visit(fn);
        fusion.visit(fn);
    }

    // Logits for one image; `guidance` enables inheritance attention.
    [[nodiscard]] Tensor predict(const Tensor& image, const Tensor* guidance = nullptr) const {
        Tensor f = backbone.forward(image);
        if (guidance) f = inheritance_attention(fusion, f, *guidance);
        return segmentor.forward(f);
    }
};

struct DiscriminatorNet {
    NetworkConfig config;
    Discriminator net;

    DiscriminatorNet() = default;
    explicit DiscriminatorNet(const NetworkConfig& cfg) : config(cfg), net(cfg, "discriminator") {
        cfg.validate();
    }

    void init(Rng& rng) { net.init(rng); }

    template <typename Fn>
    void visit(Fn&& fn) {
        net.visit(fn);
    }
    template <typename Fn>
    void visit(Fn&& fn) const {
        net.visit(fn);
    }
};

template <typename Net>
void zero_grad(Net& net) {
    net.visit([](Parameter& p) { p.zero_grad(); });
}

template <typename Net>
std::size_t parameter_count(const Net& net) {
    std::size_t n = 0;
    net.visit([&](const Parameter& p) { n += p.value.size(); });
    return n;
}

}  // namespace zsseg

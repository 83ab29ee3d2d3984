#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "zsseg/rng.hpp"
#include "zsseg/tensor.hpp"

namespace zsseg {

// A named trainable array plus its gradient accumulator.
struct Parameter {
    std::string name;
    std::vector<int> dims;
    std::vector<Real> value;
    std::vector<Real> grad;

    Parameter() = default;
    Parameter(std::string n, std::vector<int> d) : name(std::move(n)), dims(std::move(d)) {
        std::size_t count = 1;
        for (int v : dims) count *= static_cast<std::size_t>(v);
        value.assign(count, 0.0);
        grad.assign(count, 0.0);
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct ConvSpec {
    int in = 1;
    int out = 1;
    int kernel = 3;
    int stride = 1;
    int pad = 0;
    int dilation = 1;
    bool bias = true;

    [[nodiscard]] int out_extent(int n) const {
        return (n + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
    }
};

struct ConvCache {
    Shape input{};
    RowMatrix columns;  // (in * k * k) x (out_h * out_w)
};

// 2D convolution lowered to im2col + GEMM.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(const std::string& name, ConvSpec spec)
        : spec_(spec),
          weight_(name + ".weight", {spec.out, spec.in, spec.kernel, spec.kernel}),
          bias_(name + ".bias", {spec.bias ? spec.out : 0}) {}

    [[nodiscard]] const ConvSpec& spec() const noexcept { return spec_; }
    Parameter& weight() noexcept { return weight_; }
    Parameter& bias() noexcept { return bias_; }
    const Parameter& weight() const noexcept { return weight_; }
    const Parameter& bias() const noexcept { return bias_; }

    template <typename Fn>
    void visit(Fn&& fn) {
        fn(weight_);
        if (spec_.bias) fn(bias_);
    }
    template <typename Fn>
    void visit(Fn&& fn) const {
        fn(weight_);
        if (spec_.bias) fn(bias_);
    }

    // Scaled-Gaussian fan-in init: N(0, gain^2 / fan_in), zero bias.
    void init_fan_in(Rng& rng, Real gain) {
        const Real fan_in = static_cast<Real>(spec_.in) * spec_.kernel * spec_.kernel;
        const Real sigma = gain / std::sqrt(fan_in);
        for (auto& w : weight_.value) w = rng.normal(0.0, sigma);
        std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
    }
    void init_zero() {
        std::fill(weight_.value.begin(), weight_.value.end(), 0.0);
        std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
    }

    [[nodiscard]] Shape output_shape(const Shape& in) const {
        return {spec_.out, spec_.out_extent(in.height), spec_.out_extent(in.width)};
    }

    Tensor forward(const Tensor& x, ConvCache* cache = nullptr) const {
        if (x.channels() != spec_.in) {
            throw ShapeError("Conv2d " + weight_.name + ": expected " + std::to_string(spec_.in) +
                             " input channels, got " + std::to_string(x.channels()));
        }
        const Shape os = output_shape(x.shape());
        if (os.height <= 0 || os.width <= 0) throw ShapeError("Conv2d " + weight_.name + ": input too small");
        RowMatrix local;
        RowMatrix& cols = cache ? cache->columns : local;
        im2col(x, os, cols);
        if (cache) cache->input = x.shape();

        Tensor y(os);
        MatrixMap out(y.data(), spec_.out, static_cast<Eigen::Index>(os.plane()));
        ConstMatrixMap w(weight_.value.data(), spec_.out, rows_per_output());
        out.noalias() = w * cols;
        if (spec_.bias) {
            for (int o = 0; o < spec_.out; ++o) out.row(o).array() += bias_.value[o];
        }
        return y;
    }

    // Accumulates parameter gradients when `accumulate` is set; returns dL/dx
    // when `want_input_grad` is set (empty tensor otherwise).
    Tensor backward(const Tensor& dy, const ConvCache& cache, bool accumulate,
                    bool want_input_grad) {
        const Shape os = output_shape(cache.input);
        expect_shape(dy.shape(), os, "Conv2d::backward");
        ConstMatrixMap g(dy.data(), spec_.out, static_cast<Eigen::Index>(os.plane()));
        if (accumulate) {
            MatrixMap dw(weight_.grad.data(), spec_.out, rows_per_output());
            dw.noalias() += g * cache.columns.transpose();
            if (spec_.bias) {
                for (int o = 0; o < spec_.out; ++o) bias_.grad[o] += g.row(o).sum();
            }
        }
        if (!want_input_grad) return {};
        ConstMatrixMap w(weight_.value.data(), spec_.out, rows_per_output());
        RowMatrix dcols = w.transpose() * g;
        Tensor dx(cache.input);
        col2im(dcols, os, dx);
        return dx;
    }

private:
    [[nodiscard]] Eigen::Index rows_per_output() const {
        return static_cast<Eigen::Index>(spec_.in) * spec_.kernel * spec_.kernel;
    }

    void im2col(const Tensor& x, const Shape& os, RowMatrix& cols) const {
        const int k = spec_.kernel;
        cols.resize(rows_per_output(), static_cast<Eigen::Index>(os.plane()));
        for (int c = 0; c < spec_.in; ++c) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
                    Real* dst = cols.row(row).data();
                    for (int oy = 0; oy < os.height; ++oy) {
                        const int iy = oy * spec_.stride - spec_.pad + ky * spec_.dilation;
                        for (int ox = 0; ox < os.width; ++ox) {
                            const int ix = ox * spec_.stride - spec_.pad + kx * spec_.dilation;
                            const bool inside = iy >= 0 && iy < x.height() && ix >= 0 && ix < x.width();
                            dst[oy * os.width + ox] = inside ? x(c, iy, ix) : 0.0;
                        }
                    }
                }
            }
        }
    }

    void col2im(const RowMatrix& cols, const Shape& os, Tensor& dx) const {
        const int k = spec_.kernel;
        for (int c = 0; c < spec_.in; ++c) {
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
                    const Real* src = cols.row(row).data();
                    for (int oy = 0; oy < os.height; ++oy) {
                        const int iy = oy * spec_.stride - spec_.pad + ky * spec_.dilation;
                        if (iy < 0 || iy >= dx.height()) continue;
                        for (int ox = 0; ox < os.width; ++ox) {
                            const int ix = ox * spec_.stride - spec_.pad + kx * spec_.dilation;
                            if (ix < 0 || ix >= dx.width()) continue;
                            dx(c, iy, ix) += src[oy * os.width + ox];
                        }
                    }
                }
            }
        }
    }

    ConvSpec spec_{};
    Parameter weight_;
    Parameter bias_;
};

// Element-wise activations.  `slope` = 0 gives ReLU.
inline Tensor leaky_relu(Tensor x, Real slope = 0.0) {
    for (auto& v : x.values()) v = v > 0.0 ? v : slope * v;
    return x;
}

// Gradient through a (leaky) ReLU given its output.
inline Tensor leaky_relu_backward(Tensor dy, const Tensor& y, Real slope = 0.0) {
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= y[i] > 0.0 ? 1.0 : slope;
    return dy;
}

inline Real sigmoid(Real v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const Real e = std::exp(v);
    return e / (1.0 + e);
}

// Separable bilinear resampling by an integer factor with half-pixel centers
// (the align_corners = false convention).
class BilinearUpsample {
public:
    explicit BilinearUpsample(int factor = 4) : factor_(factor) {}

    [[nodiscard]] int factor() const noexcept { return factor_; }

    Tensor forward(const Tensor& x) const {
        const auto ty = taps(x.height());
        const auto tx = taps(x.width());
        Tensor y(x.channels(), x.height() * factor_, x.width() * factor_);
        for (int c = 0; c < x.channels(); ++c) {
            for (int oy = 0; oy < y.height(); ++oy) {
                const Tap& a = ty[oy];
                for (int ox = 0; ox < y.width(); ++ox) {
                    const Tap& b = tx[ox];
                    y(c, oy, ox) = a.w0 * (b.w0 * x(c, a.i0, b.i0) + b.w1 * x(c, a.i0, b.i1)) +
                                   a.w1 * (b.w0 * x(c, a.i1, b.i0) + b.w1 * x(c, a.i1, b.i1));
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy, const Shape& in) const {
        expect_shape(dy.shape(), Shape{in.channels, in.height * factor_, in.width * factor_},
                     "BilinearUpsample::backward");
        const auto ty = taps(in.height);
        const auto tx = taps(in.width);
        Tensor dx(in);
        for (int c = 0; c < in.channels; ++c) {
            for (int oy = 0; oy < dy.height(); ++oy) {
                const Tap& a = ty[oy];
                for (int ox = 0; ox < dy.width(); ++ox) {
                    const Tap& b = tx[ox];
                    const Real g = dy(c, oy, ox);
                    dx(c, a.i0, b.i0) += a.w0 * b.w0 * g;
                    dx(c, a.i0, b.i1) += a.w0 * b.w1 * g;
                    dx(c, a.i1, b.i0) += a.w1 * b.w0 * g;
                    dx(c, a.i1, b.i1) += a.w1 * b.w1 * g;
                }
            }
        }
        return dx;
    }

private:
    struct Tap {
        int i0, i1;
        Real w0, w1;
    };

    [[nodiscard]] std::vector<Tap> taps(int n) const {
        std::vector<Tap> t(static_cast<std::size_t>(n) * factor_);
        for (int o = 0; o < n * factor_; ++o) {
            Real src = (o + 0.5) / factor_ - 0.5;
            if (src < 0.0) src = 0.0;
            const int i0 = std::min(static_cast<int>(src), n - 1);
            const int i1 = std::min(i0 + 1, n - 1);
            const Real l1 = src - i0;
            t[o] = {i0, i1, 1.0 - l1, l1};
        }
        return t;
    }

    int factor_;
};

// Non-overlapping k x k mean pooling.
inline Tensor average_pool(const Tensor& x, int k) {
    if (k <= 0 || x.height() % k != 0 || x.width() % k != 0) {
        throw ShapeError("average_pool: extent " + to_string(x.shape()) + " not divisible by " +
                         std::to_string(k));
    }
    Tensor y(x.channels(), x.height() / k, x.width() / k);
    const Real norm = 1.0 / (static_cast<Real>(k) * k);
    for (int c = 0; c < x.channels(); ++c)
        for (int yy = 0; yy < x.height(); ++yy)
            for (int xx = 0; xx < x.width(); ++xx) y(c, yy / k, xx / k) += x(c, yy, xx) * norm;
    return y;
}

}  // namespace zsseg

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "zsseg/layers.hpp"

using namespace zsseg;

namespace {

Conv2d random_conv(ConvSpec spec, Rng& rng) {
    Conv2d c("c", spec);
    c.visit([&](Parameter& p) {
        for (auto& v : p.value) v = rng.uniform(-1, 1);
    });
    return c;
}

}  // namespace

TEST(Conv2d, MatchesDirectLoop) {
    Rng rng(1);
    const ConvSpec specs[] = {{2, 3, 3, 1, 1, 1, true}, {3, 4, 3, 2, 1, 1, true}, {2, 2, 3, 1, 4, 4, false},
                              {4, 1, 4, 2, 1, 1, true}, {3, 2, 1, 1, 0, 1, true}};
    for (const auto& s : specs) {
        Conv2d c = random_conv(s, rng);
        const Tensor x = gradcheck::random_tensor({s.in, 9, 7}, rng);
        const Tensor want = oracle::conv2d(x, c.weight().value, s.bias ? c.bias().value : std::vector<Real>{}, s.out,
                                           s.kernel, s.stride, s.pad, s.dilation);
        const Tensor got = c.forward(x);
        ASSERT_EQ(got.shape(), want.shape());
        EXPECT_LT(max_abs_diff(got, want), 1e-12);
        EXPECT_EQ(got.shape(), c.output_shape(x.shape()));
    }
}

TEST(Conv2d, RejectsWrongChannelCount) {
    Conv2d c("c", {2, 2, 3, 1, 1, 1, true});
    EXPECT_THROW(c.forward(Tensor(3, 4, 4)), ShapeError);
}

TEST(Conv2d, BackwardAccumulatesOrLeavesParams) {
    Rng rng(2);
    Conv2d c = random_conv({2, 2, 3, 1, 1, 1, true}, rng);
    const Tensor x = gradcheck::random_tensor({2, 5, 5}, rng);
    ConvCache cache;
    const Tensor y = c.forward(x, &cache);
    const Tensor dy(y.shape(), 1.0);
    c.weight().zero_grad();
    c.backward(dy, cache, true, false);
    const std::vector<Real> once = c.weight().grad;
    c.backward(dy, cache, true, false);
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(c.weight().grad[i], 2 * once[i], 1e-12);
    c.backward(dy, cache, false, false);
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(c.weight().grad[i], 2 * once[i], 1e-12);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
    Rng rng(3);
    Conv2d c = random_conv({2, 3, 3, 2, 1, 1, true}, rng);
    const Tensor x = gradcheck::random_tensor({2, 6, 6}, rng);
    ConvCache cache;
    const Tensor y = c.forward(x, &cache);
    const Tensor r = gradcheck::random_tensor(y.shape(), rng);
    const auto f = [&](const Tensor& in) {
        const Tensor o = c.forward(in);
        Real s = 0;
        for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * r[i];
        return s;
    };
    c.visit([](Parameter& p) { p.zero_grad(); });
    const Tensor dx = c.backward(r, cache, true, true);
    EXPECT_LT(gradcheck::rel_error(dx, gradcheck::numeric(x, f)), 1e-6);
    auto v = gradcheck::wrap(c);
    EXPECT_LT(gradcheck::worst(gradcheck::check_params(v, [&] { return f(x); })), 1e-6);
}

TEST(Bilinear, MatchesOracleAndPreservesConstants) {
    Rng rng(4);
    BilinearUpsample up(4);
    const Tensor x = gradcheck::random_tensor({3, 5, 4}, rng);
    EXPECT_LT(max_abs_diff(up.forward(x), oracle::upsample(x, 4)), 1e-12);
    const Tensor c(1, 3, 3, 0.7);
    const Tensor y = up.forward(c);
    for (Real v : y.values()) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(Bilinear, BackwardIsAdjoint) {
    Rng rng(5);
    BilinearUpsample up(2);
    const Tensor x = gradcheck::random_tensor({2, 3, 3}, rng);
    const Tensor dy = gradcheck::random_tensor({2, 6, 6}, rng);
    const Tensor y = up.forward(x), dx = up.backward(dy, x.shape());
    Real a = 0, b = 0;
    for (std::size_t i = 0; i < y.size(); ++i) a += y[i] * dy[i];
    for (std::size_t i = 0; i < x.size(); ++i) b += x[i] * dx[i];
    EXPECT_NEAR(a, b, 1e-12);
}

TEST(Pooling, AveragesBlocks) {
    Tensor x(1, 2, 4);
    for (int i = 0; i < 8; ++i) x[i] = i;
    const Tensor y = average_pool(x, 2);
    EXPECT_EQ(y.shape(), (Shape{1, 1, 2}));
    EXPECT_DOUBLE_EQ(y[0], (0 + 1 + 4 + 5) / 4.0);
    EXPECT_DOUBLE_EQ(y[1], (2 + 3 + 6 + 7) / 4.0);
    EXPECT_THROW(average_pool(x, 3), ShapeError);
}

TEST(Activations, LeakyReluAndSigmoid) {
    Tensor x(1, 1, 3);
    x[0] = -2, x[1] = 0, x[2] = 3;
    const Tensor y = leaky_relu(x, 0.1);
    EXPECT_DOUBLE_EQ(y[0], -0.2);
    EXPECT_DOUBLE_EQ(y[2], 3.0);
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
    EXPECT_GT(sigmoid(-800.0), -1e-300);
    EXPECT_LT(sigmoid(800.0), 1.0 + 1e-15);
}

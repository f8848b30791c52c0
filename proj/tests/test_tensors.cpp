#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "wafertex/gradcheck.hpp"
#include "wafertex/tensors.hpp"

using namespace wafertex;

namespace {

ConvSpec identity_kernel(std::size_t channels) {
    ConvSpec s = ConvSpec::zeros(channels, channels, 3, 3);
    s.padding = 1;
    for (std::size_t c = 0; c < channels; ++c) s.weights[((c * channels + c) * 3 + 1) * 3 + 1] = 1.0f;
    return s;
}

TensorD random_double(std::mt19937_64& rng, std::size_t c, std::size_t h, std::size_t w) {
    TensorD t(c, h, w);
    for (auto& v : t.data()) v = oracle::uniform(rng, -1.0, 1.0);
    return t;
}

}  // namespace

TEST(Tensor, ShapeAndLayout) {
    Tensor t(2, 3, 4);
    EXPECT_EQ(t.size(), 24u);
    t.at(1, 2, 3) = 7.0f;
    EXPECT_EQ(t[23], 7.0f);
    EXPECT_THROW(Tensor(1, 2, 2, std::vector<float>(3)), std::invalid_argument);
}

TEST(Conv2d, IdentityKernelIsIdentity) {
    std::mt19937_64 rng(1);
    const Tensor x = oracle::random_tensor(rng, 1, 3, 3);
    EXPECT_EQ(conv2d(x, identity_kernel(1)), x);
}

TEST(Conv2d, ZeroKernelGivesZeros) {
    std::mt19937_64 rng(2);
    const Tensor x = oracle::random_tensor(rng, 2, 6, 5);
    ConvSpec s = ConvSpec::zeros(2, 3, 3, 3);
    s.stride = 2;
    const Tensor y = conv2d(x, s);
    EXPECT_EQ(y.channels(), 3u);
    EXPECT_EQ(y.height(), 2u);
    EXPECT_EQ(y.width(), 2u);
    for (const float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Conv2d, MatchesLoopOracleDilated) {
    std::mt19937_64 rng(3);
    const Tensor x = oracle::random_tensor(rng, 2, 5, 5);
    ConvSpec s = ConvSpec::seeded(2, 3, 3, 3, 11, 0.5f);
    s.dilation = 2;
    s.padding = 2;
    const Tensor y = conv2d(x, s);
    const auto ref = oracle::conv2d(x, s);
    ASSERT_EQ(y.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-5);
}

TEST(Conv2d, MatchesLoopOracleStridedGrouped) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t groups = 1 + static_cast<std::size_t>(trial % 2);
        const Tensor x = oracle::random_tensor(rng, 4, 7, 6);
        ConvSpec s = ConvSpec::seeded(4, 2 * groups, 3, 2, 100 + trial, 0.5f);
        s.groups = groups;
        s.weights.resize(s.out_channels * (4 / groups) * 3 * 2);
        s.stride = 1 + static_cast<std::size_t>(trial % 3);
        s.padding = static_cast<std::size_t>(trial % 2);
        const Tensor y = conv2d(x, s);
        const auto ref = oracle::conv2d(x, s);
        ASSERT_EQ(y.size(), ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-5);
    }
}

TEST(Conv2d, Errors) {
    const Tensor x(2, 3, 3);
    EXPECT_THROW(conv2d(x, ConvSpec::zeros(3, 1, 1, 1)), std::invalid_argument);
    EXPECT_THROW(conv2d(x, ConvSpec::zeros(2, 1, 5, 5)), std::invalid_argument);
    ConvSpec bad = ConvSpec::zeros(2, 3, 1, 1);
    bad.groups = 2;
    EXPECT_THROW(conv2d(x, bad), std::invalid_argument);
}

TEST(Conv2d, Linearity) {
    std::mt19937_64 rng(5);
    const Tensor a = oracle::random_tensor(rng, 3, 8, 8);
    const Tensor b = oracle::random_tensor(rng, 3, 8, 8);
    ConvSpec s = ConvSpec::seeded(3, 2, 3, 3, 9, 0.3f, false);
    s.padding = 1;
    Tensor mix(3, 8, 8);
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0f * a[i] - 0.5f * b[i];
    const Tensor ya = conv2d(a, s), yb = conv2d(b, s), ym = conv2d(mix, s);
    for (std::size_t i = 0; i < ym.size(); ++i) {
        const double expect = 2.0 * ya[i] - 0.5 * yb[i];
        EXPECT_NEAR(ym[i], expect, 1e-5 * std::max(1.0, std::abs(expect)));
    }
}

TEST(Upsample, FactorOneAndBlocks) {
    const Tensor x(1, 2, 2, {1, 2, 3, 4});
    EXPECT_EQ(upsample_nearest(x, 1), x);
    const Tensor y = upsample_nearest(x, 2);
    const std::vector<float> expect = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    EXPECT_EQ(y.values(), expect);
    EXPECT_THROW(upsample_nearest(x, 0), std::invalid_argument);
}

TEST(Upsample, IndexMapOracle) {
    std::mt19937_64 rng(6);
    const Tensor x = oracle::random_tensor(rng, 3, 4, 4);
    const Tensor y = upsample_nearest(x, 3);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(y.at(c, i, j), x.at(c, i / 3, j / 3));
}

TEST(GlobalAvgPool, Values) {
    EXPECT_FLOAT_EQ(global_avg_pool(Tensor(1, 3, 3, 4.25f))[0], 4.25f);
    EXPECT_FLOAT_EQ(global_avg_pool(Tensor(1, 2, 2, {1, 2, 3, 4}))[0], 2.5f);
    EXPECT_THROW(global_avg_pool(Tensor()), std::invalid_argument);
    std::mt19937_64 rng(7);
    const Tensor x = oracle::random_tensor(rng, 4, 7, 5);
    const Tensor g = global_avg_pool(x);
    for (std::size_t c = 0; c < 4; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 35; ++i) acc += x[c * 35 + i];
        EXPECT_NEAR(g[c], acc / 35.0, 1e-6 * std::max(1.0, std::abs(acc / 35.0)));
    }
    const Tensor up = upsample_nearest(x, 2);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(global_avg_pool(up)[c], g[c], 1e-6);
}

TEST(Pointwise, IdentitiesAndBroadcast) {
    std::mt19937_64 rng(8);
    const Tensor x = oracle::random_tensor(rng, 3, 4, 5);
    EXPECT_EQ(pointwise(x, Tensor(3, 4, 5), PointwiseKind::add), x);
    EXPECT_EQ(pointwise(x, Tensor(3, 1, 1, 1.0f), PointwiseKind::mul), x);
    const Tensor y = oracle::random_tensor(rng, 3, 4, 5);
    const Tensor s = pointwise(x, y, PointwiseKind::mul);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(s[i], x[i] * y[i]);
    const Tensor w = oracle::random_tensor(rng, 3, 1, 1);
    const Tensor b = pointwise(x, w, PointwiseKind::add);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(b[c * 20 + i], x[c * 20 + i] + w[c]);
    EXPECT_THROW(pointwise(x, Tensor(3, 4, 4), PointwiseKind::add), std::invalid_argument);
    EXPECT_THROW(pointwise(x, Tensor(2, 1, 1), PointwiseKind::mul), std::invalid_argument);
}

TEST(Sigmoid, Properties) {
    const Tensor x(1, 1, 4, {0.0f, 3.0f, 100.0f, -100.0f});
    const Tensor y = sigmoid_map(x);
    EXPECT_EQ(y[0], 0.5f);
    for (const float v : y.data()) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 1e-30f);
        EXPECT_LE(v, 1.0f);
    }
    std::mt19937_64 rng(9);
    const Tensor r = oracle::random_tensor(rng, 2, 4, 4, -8.0, 8.0);
    Tensor neg = r;
    for (auto& v : neg.data()) v = -v;
    const Tensor a = sigmoid_map(r), b = sigmoid_map(neg);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i] + b[i], 1.0f, 1e-6);
}

TEST(EnsureFinite, ReportsCoordinate) {
    Tensor x(1, 2, 2);
    x.at(0, 1, 0) = std::numeric_limits<float>::quiet_NaN();
    try {
        ensure_finite(x, "probe");
        FAIL() << "expected domain_error";
    } catch (const std::domain_error& e) {
        EXPECT_NE(std::string(e.what()).find("(c=0, y=1, x=0)"), std::string::npos) << e.what();
    }
}

TEST(GradCheck, LinearOpIsExact) {
    std::mt19937_64 rng(10);
    const TensorD x = random_double(rng, 2, 4, 4);
    const TensorD other = random_double(rng, 2, 4, 4);
    EXPECT_LE(grad_check(pointwise_op(other, PointwiseKind::add), x, {1e-4, 32, 1}).max_relative_error, 1e-10);
}

TEST(GradCheck, PrimitivesOnTenSeeds) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const TensorD x = random_double(rng, 2, 5, 5);
        const TensorD other = random_double(rng, 2, 5, 5);
        ConvSpec s = ConvSpec::seeded(2, 3, 3, 3, seed, 0.5f);
        s.padding = 1;
        const GradCheckOptions o4{1e-4, 32, seed};
        const GradCheckOptions o3{1e-3, 32, seed};
        EXPECT_LE(grad_check(sigmoid_op(), x, o4).max_relative_error, 1e-4) << seed;
        EXPECT_LE(grad_check(conv2d_op(s), x, o3).max_relative_error, 1e-4) << seed;
        EXPECT_LE(grad_check(pointwise_op(other, PointwiseKind::mul), x, o4).max_relative_error, 1e-4) << seed;
        EXPECT_LE(grad_check(global_avg_pool_op(), x, o4).max_relative_error, 1e-4) << seed;
    }
}

TEST(GradCheck, RejectsBadEps) {
    const TensorD x(1, 2, 2);
    EXPECT_THROW(grad_check(sigmoid_op(), x, {0.0, 4, 0}), std::invalid_argument);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "wafertex/spectrum.hpp"
#include "wafertex/synthgen.hpp"

using namespace wafertex;

namespace {

std::size_t mask_count(const Mask& m) {
    std::size_t n = 0;
    for (const auto v : m.data()) n += v != 0;
    return n;
}

}  // namespace

TEST(Grating, SampledValues) {
    GratingSpec g;
    g.period = 8.0;
    g.amplitude = 2.0;
    const Tensor t = gen_grating(g, 3, 16);
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 16; ++x)
            EXPECT_NEAR(t.at(0, y, x), 2.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(x) / 8.0), 1e-6);
    g.waveform = Waveform::square;
    g.phase = 0.1;
    const Tensor sq = gen_grating(g, 1, 16);
    for (std::size_t x = 0; x < 16; ++x) EXPECT_EQ(std::abs(sq[x]), 2.0f);
    g.period = 1.5;
    EXPECT_THROW(gen_grating(g, 4, 4), std::invalid_argument);
}

TEST(Grating, SpectralPeakAtAnalyticBin) {
    const std::size_t H = 32, W = 48;
    for (const auto [u, v] : {std::pair{3, 0}, std::pair{0, 5}, std::pair{4, 2}, std::pair{7, 3}}) {
        const Tensor t = gen_grating(bin_aligned_grating(u, v, H, W, 1.0, 0.3), H, W);
        const Spectrum s = dft2d(t);
        std::size_t best = 0;
        for (std::size_t i = 1; i < s.coeffs.size(); ++i)
            if (std::abs(s.coeffs[i]) > std::abs(s.coeffs[best]) + 1e-9) best = i;
        const std::size_t bu = best % W, bv = best / W;
        const bool direct = bu == static_cast<std::size_t>(u) && bv == static_cast<std::size_t>(v);
        const bool mirror = bu == (W - static_cast<std::size_t>(u)) % W && bv == (H - static_cast<std::size_t>(v)) % H;
        EXPECT_TRUE(direct || mirror) << u << "," << v << " got " << bu << "," << bv;
        EXPECT_NEAR(std::abs(s.at(static_cast<std::size_t>(u), static_cast<std::size_t>(v))), H * W / 2.0, 1e-3);
    }
    EXPECT_THROW(bin_aligned_grating(0, 0, 8, 8, 1.0), std::invalid_argument);
}

TEST(Anomaly, ContrastSignAndValue) {
    const Tensor base(1, 9, 9, 0.25f);
    AnomalySpec a;
    a.cx = 4;
    a.cy = 4;
    a.radius = 2;
    a.contrast = 0.5;
    const auto up = inject_anomaly(base, a);
    a.contrast = -0.5;
    const auto down = inject_anomaly(base, a);
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (up.mask[i]) {
            EXPECT_FLOAT_EQ(up.image[i], 0.75f);
            EXPECT_FLOAT_EQ(down.image[i], -0.25f);
        } else {
            EXPECT_EQ(up.image[i], 0.25f);
        }
    }
    EXPECT_EQ(up.mask, down.mask);
}

TEST(Anomaly, DiskRasterization) {
    AnomalySpec a;
    a.cx = 5;
    a.cy = 6;
    a.radius = 0.5;
    const auto one = inject_anomaly(Tensor(1, 12, 12), a);
    EXPECT_EQ(mask_count(one.mask), 1u);
    EXPECT_EQ(one.mask.at(0, 6, 5), 1);
    a.radius = 3;
    const auto disk = inject_anomaly(Tensor(1, 12, 12), a);
    std::size_t expect = 0;
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) expect += (x - 5) * (x - 5) + (y - 6) * (y - 6) <= 9;
    EXPECT_EQ(mask_count(disk.mask), expect);
}

TEST(Anomaly, AxisAlignedScratchLength) {
    for (const double length : {1.0, 4.0, 7.0, 10.4, 12.6}) {
        for (const double angle : {0.0, std::numbers::pi / 2}) {
            AnomalySpec a;
            a.kind = AnomalyKind::scratch;
            a.cx = 16;
            a.cy = 16;
            a.length = length;
            a.thickness = 1;
            a.angle = angle;
            EXPECT_EQ(mask_count(inject_anomaly(Tensor(1, 32, 32), a).mask),
                      static_cast<std::size_t>(std::round(length)))
                << length << " " << angle;
        }
    }
}

TEST(Anomaly, ObliqueScratchIsConnected) {
    AnomalySpec a;
    a.kind = AnomalyKind::scratch;
    a.cx = 16;
    a.cy = 16;
    a.length = 20;
    a.angle = 0.7;
    const Mask m = inject_anomaly(Tensor(1, 32, 32), a).mask;
    std::size_t isolated = 0;
    for (std::size_t y = 1; y < 31; ++y)
        for (std::size_t x = 1; x < 31; ++x) {
            if (!m.at(0, y, x)) continue;
            int nb = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (dy || dx) nb += m.at(0, y + static_cast<std::size_t>(dy), x + static_cast<std::size_t>(dx));
            isolated += nb == 0;
        }
    EXPECT_EQ(isolated, 0u);
}

TEST(Scene, TightBoxesAndMaskUnion) {
    SceneSpec spec;
    spec.height = 40;
    spec.width = 40;
    spec.gratings = {bin_aligned_grating(4, 0, 40, 40, 1.0)};
    AnomalySpec d;
    d.cx = 10;
    d.cy = 12;
    d.radius = 3;
    AnomalySpec c;
    c.kind = AnomalyKind::contamination;
    c.cx = 28;
    c.cy = 26;
    c.softness = 2;
    spec.anomalies = {d, c};
    const Scene s = gen_scene(spec);
    ASSERT_EQ(s.ground_truth.size(), 2u);
    EXPECT_EQ(s.ground_truth[0].class_id, default_class(AnomalyKind::disk));
    EXPECT_EQ(s.ground_truth[1].class_id, default_class(AnomalyKind::contamination));
    for (const auto& gt : s.ground_truth) {
        const Mask m = rle_decode(*gt.mask);
        int x0 = 1000, y0 = 1000, x1 = -1, y1 = -1;
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 40; ++x)
                if (m.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x))) {
                    x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
                }
        EXPECT_EQ(gt.box, (Box{double(x0), double(y0), double(x1 + 1), double(y1 + 1)}));
        EXPECT_EQ(gt.score, 1.0);
    }
    EXPECT_EQ(s.ground_truth[0].box, (Box{7, 9, 14, 16}));
    const Mask a = rle_decode(*s.ground_truth[0].mask), b = rle_decode(*s.ground_truth[1].mask);
    for (std::size_t i = 0; i < s.mask.size(); ++i) EXPECT_EQ(s.mask[i], a[i] | b[i]);
}

TEST(Scene, DeterministicAndNoiseStatistics) {
    SceneSpec spec;
    spec.height = 64;
    spec.width = 64;
    spec.noise_sigma = 0.5;
    spec.seed = 42;
    const Scene a = gen_scene(spec), b = gen_scene(spec);
    EXPECT_EQ(a.image, b.image);
    spec.seed = 43;
    EXPECT_NE(gen_scene(spec).image, a.image);
    double mean = 0.0, sq = 0.0;
    for (const float v : a.image.data()) mean += v, sq += static_cast<double>(v) * v;
    mean /= 4096.0;
    const double sd = std::sqrt(sq / 4096.0 - mean * mean);
    EXPECT_NEAR(mean, 0.0, 4 * 0.5 / 64.0);
    EXPECT_NEAR(sd, 0.5, 0.05);
    EXPECT_TRUE(a.ground_truth.empty());
    EXPECT_EQ(mask_count(a.mask), 0u);
}

TEST(Scene, Errors) {
    AnomalySpec a;
    a.cx = 1;
    a.cy = 5;
    a.radius = 3;
    EXPECT_THROW(inject_anomaly(Tensor(1, 10, 10), a), std::invalid_argument);
    a.cx = 5;
    a.contrast = 0.0;
    EXPECT_THROW(inject_anomaly(Tensor(1, 10, 10), a), std::invalid_argument);
    a.contrast = 0.5;
    EXPECT_THROW(inject_anomaly(Tensor(2, 10, 10), a), std::invalid_argument);
    a.kind = AnomalyKind::scratch;
    a.length = 30;
    EXPECT_THROW(inject_anomaly(Tensor(1, 10, 10), a), std::invalid_argument);
    SceneSpec s;
    s.noise_sigma = -1;
    EXPECT_THROW(gen_scene(s), std::invalid_argument);
}

TEST(Suite, LayoutAndKinds) {
    const auto suite = standard_suite(64);
    ASSERT_EQ(suite.size(), 45u);
    for (const auto& s : suite) {
        EXPECT_EQ(s.height, 64u);
        EXPECT_EQ(s.gratings.size(), 2u);
        EXPECT_EQ(s.anomalies.size(), 1u);
        EXPECT_DOUBLE_EQ(s.noise_sigma, 0.01);
    }
    EXPECT_DOUBLE_EQ(suite.front().anomalies[0].contrast / suite.front().gratings[0].amplitude, 0.1);
    EXPECT_DOUBLE_EQ(suite.back().anomalies[0].contrast / suite.back().gratings[0].amplitude, 0.5);
    EXPECT_EQ(suite.back().anomalies[0].kind, AnomalyKind::contamination);
}

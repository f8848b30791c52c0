#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "wafertex/metrics.hpp"

using namespace wafertex;

namespace {

std::vector<Detection> random_detections(std::mt19937_64& rng, std::size_t n, int classes, int extent) {
    std::vector<Detection> out(n);
    for (auto& d : out) {
        d.class_id = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
        d.score = static_cast<double>(rng() % 8) / 8.0;  // coarse scores force ties
        d.box = oracle::random_box(rng, extent);
    }
    return out;
}

Detection det(int cls, double score, Box box) {
    Detection d;
    d.class_id = cls;
    d.score = score;
    d.box = box;
    return d;
}

// Two GTs, predictions ranked TP, FP, TP: AP = 0.5 * 1 + 0.5 * 2/3.
ImageDetections five_sixths_fixture() {
    ImageDetections img;
    img.image_id = "fixture";
    img.ground_truth = {det(0, 1, {0, 0, 10, 10}), det(0, 1, {20, 20, 30, 30})};
    img.predictions = {det(0, 0.9, {0, 0, 10, 10}), det(0, 0.8, {40, 40, 50, 50}),
                       det(0, 0.7, {20, 20, 30, 30})};
    return img;
}

Mask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double p) {
    Mask m(1, h, w);
    for (auto& v : m.data()) v = oracle::uniform(rng, 0, 1) < p;
    return m;
}

}  // namespace

TEST(BoxIou, CellOracle) {
    std::mt19937_64 rng(50);
    for (int t = 0; t < 500; ++t) {
        const Box a = oracle::random_box(rng, 16), b = oracle::random_box(rng, 16);
        EXPECT_DOUBLE_EQ(box_iou(a, b), oracle::cell_iou(a, b));
        EXPECT_DOUBLE_EQ(box_iou(a, b), box_iou(b, a));
    }
    EXPECT_EQ(box_iou({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0);
    EXPECT_EQ(box_iou({0, 0, 1, 1}, {1, 0, 2, 1}), 0.0);
}

TEST(Nms, MatchesOracle) {
    std::mt19937_64 rng(51);
    for (int t = 0; t < 200; ++t) {
        const auto d = random_detections(rng, 1 + rng() % 15, 2, 12);
        const double thr = 0.3 + 0.1 * static_cast<double>(t % 4);
        const std::size_t max_det = 1 + rng() % 10;
        EXPECT_EQ(nms_indices(d, thr, max_det), oracle::nms(d, thr, max_det)) << t;
    }
}

TEST(Match, MatchesOracle) {
    std::mt19937_64 rng(52);
    for (int t = 0; t < 200; ++t) {
        const auto preds = random_detections(rng, rng() % 12, 2, 10);
        const auto gts = random_detections(rng, rng() % 8, 2, 10);
        const double thr = t % 2 ? 0.5 : 0.25;
        const auto m = match_detections(preds, gts, thr, false);
        const auto ref = oracle::greedy_match(preds, gts, thr);
        EXPECT_EQ(m.pred_to_gt, ref) << t;
        std::size_t tp = 0;
        for (const int g : ref) tp += g >= 0;
        EXPECT_EQ(m.tp, tp);
        EXPECT_EQ(m.fp, preds.size() - tp);
        EXPECT_EQ(m.fn, gts.size() - tp);
        for (std::size_t p = 0; p < preds.size(); ++p) {
            if (ref[p] >= 0) EXPECT_EQ(m.gt_to_pred[static_cast<std::size_t>(ref[p])], static_cast<int>(p));
        }
    }
}

TEST(AveragePrecision, MatchesOracle) {
    std::mt19937_64 rng(53);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = rng() % 20;
        std::vector<ScoredMatch> m(n);
        std::vector<std::pair<double, bool>> ranked(n);
        std::size_t tp = 0;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = {static_cast<double>(rng() % 6) / 6.0, rng() % 2 == 0};
            ranked[i] = {m[i].score, m[i].true_positive};
            tp += m[i].true_positive;
        }
        const std::size_t num_gt = tp + rng() % 4;
        if (num_gt == 0) continue;
        EXPECT_NEAR(average_precision(m, num_gt), oracle::average_precision(ranked, num_gt), 1e-12) << t;
    }
}

TEST(AveragePrecision, FiveSixthsFixture) {
    const std::vector<ImageDetections> images = {five_sixths_fixture()};
    const MapResult r = map_range(images, 1, false);
    EXPECT_NEAR(r.map50, 5.0 / 6.0, 1e-12);
    EXPECT_NEAR(r.map50_95, 5.0 / 6.0, 1e-12);
    const std::vector<ScoredMatch> m = {{0.9, true}, {0.8, false}, {0.7, true}};
    EXPECT_NEAR(average_precision(m, 2), 5.0 / 6.0, 1e-12);
    const PRCurve c = pr_curve(m, 2, 0.5);
    ASSERT_EQ(c.points.size(), 3u);
    EXPECT_DOUBLE_EQ(c.points[1][0], 0.5);
    EXPECT_DOUBLE_EQ(c.points[1][1], 0.5);
    EXPECT_DOUBLE_EQ(c.points[2][1], 2.0 / 3.0);
}

TEST(Overlap, DiceIdentity) {
    std::mt19937_64 rng(54);
    for (int t = 0; t < 100; ++t) {
        const Mask a = random_mask(rng, 9, 11, 0.4), b = random_mask(rng, 9, 11, 0.4);
        const Overlap o = mask_iou_dice(a, b);
        EXPECT_NEAR(o.dice, 2 * o.iou / (1 + o.iou), 1e-9);
        const Box ba = oracle::random_box(rng, 20), bb = oracle::random_box(rng, 20);
        const Overlap ob = box_iou_dice(ba, bb);
        EXPECT_NEAR(ob.dice, 2 * ob.iou / (1 + ob.iou), 1e-9);
    }
    const Overlap empty = mask_iou_dice(Mask(1, 3, 3), Mask(1, 3, 3));
    EXPECT_EQ(empty.iou, 1.0);
    EXPECT_EQ(empty.dice, 1.0);
    EXPECT_THROW(mask_iou_dice(Mask(1, 3, 3), Mask(1, 3, 4)), std::invalid_argument);
}

TEST(PrecisionRecall, Conventions) {
    const auto none = precision_recall({0, 0, 0});
    EXPECT_EQ(none.precision, 1.0);
    EXPECT_EQ(none.recall, 1.0);
    const auto some = precision_recall({3, 1, 2});
    EXPECT_DOUBLE_EQ(some.precision, 0.75);
    EXPECT_DOUBLE_EQ(some.recall, 0.6);
}

TEST(Evaluate, OrderingAndConfusion) {
    std::mt19937_64 rng(55);
    for (int t = 0; t < 30; ++t) {
        std::vector<ImageDetections> images(3);
        for (auto& img : images) {
            img.ground_truth = random_detections(rng, 1 + rng() % 4, 3, 24);
            img.predictions = random_detections(rng, rng() % 6, 3, 24);
            for (const auto& g : img.ground_truth)
                if (rng() % 2) img.predictions.push_back(det(g.class_id, 0.95, g.box));
        }
        const MetricsReport r = evaluate(images, 3, false);
        EXPECT_LE(r.map.map50_95, r.map.map50 + 1e-12);
        for (std::size_t k = 1; k < 10; ++k) EXPECT_LE(r.map.map_at[k], r.map.map_at[k - 1] + 1e-12);
        for (std::size_t col = 0; col <= 3; ++col) {
            double sum = 0.0;
            for (std::size_t row = 0; row <= 3; ++row) sum += r.confusion.at(row, col);
            if (sum > 0.0) EXPECT_NEAR(sum, 1.0, 1e-12);
        }
        EXPECT_GE(r.mean_iou, 0.0);
        EXPECT_LE(r.mean_dice, 1.0);
    }
}

TEST(Evaluate, FixtureCounts) {
    const std::vector<ImageDetections> images = {five_sixths_fixture()};
    const MetricsReport r = evaluate(images, 1, false);
    EXPECT_EQ(r.counts.tp, 2u);
    EXPECT_EQ(r.counts.fp, 1u);
    EXPECT_EQ(r.counts.fn, 0u);
    EXPECT_DOUBLE_EQ(r.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.recall, 1.0);
    EXPECT_DOUBLE_EQ(r.mean_iou, 1.0);
    EXPECT_DOUBLE_EQ(r.confusion.at(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(r.confusion.at(0, 1), 1.0);
    const MetricsReport strict = evaluate(images, 1, false, 0.85);
    EXPECT_EQ(strict.counts.tp, 1u);
    EXPECT_EQ(strict.counts.fn, 1u);
}

TEST(Auroc, PairwiseOracleWithTies) {
    std::mt19937_64 rng(56);
    for (int t = 0; t < 50; ++t) {
        Tensor s(1, 6, 7);
        Mask m(1, 6, 7);
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = static_cast<float>(rng() % 5);
            m[i] = rng() % 3 == 0;
        }
        m[0] = 1;
        m[1] = 0;
        double wins = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t j = 0; j < s.size(); ++j) {
                if (!m[i] || m[j]) continue;
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
            }
        EXPECT_NEAR(pixel_auroc(s, m), wins / pairs, 1e-12);
    }
    EXPECT_DOUBLE_EQ(pixel_auroc(Tensor(1, 1, 4, {0.1f, 0.4f, 0.35f, 0.8f}), Mask(1, 1, 4, {0, 0, 1, 1})), 0.75);
    EXPECT_THROW(pixel_auroc(Tensor(1, 1, 2), Mask(1, 1, 2)), std::invalid_argument);
}

TEST(Rle, KnownRunsAndRoundTrip) {
    EXPECT_EQ(rle_encode(Mask(1, 2, 2)).runs, (std::vector<std::uint32_t>{4}));
    EXPECT_EQ(rle_encode(Mask(1, 2, 2, std::vector<unsigned char>(4, 1))).runs, (std::vector<std::uint32_t>{0, 4}));
    std::mt19937_64 rng(57);
    for (int t = 0; t < 100; ++t) {
        const Mask m = random_mask(rng, 1 + rng() % 9, 1 + rng() % 9, 0.5);
        const RleMask r = rle_encode(m);
        EXPECT_EQ(rle_decode(r), m);
        std::size_t fg = 0;
        for (const auto v : m.data()) fg += v;
        EXPECT_EQ(r.foreground(), fg);
    }
    RleMask bad{2, 2, {1, 2}};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wafertex/rle.hpp"
#include "wafertex/tensors.hpp"

namespace wafertex {

// Pixel-edge coordinates: a pixel (x, y) covers [x, x+1) x [y, y+1).
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double area() const { return (x2 - x1) * (y2 - y1); }
    bool valid() const { return x1 < x2 && y1 < y2; }
    bool operator==(const Box&) const = default;
};

struct Detection {
    int class_id = 0;
    double score = 1.0;
    Box box;
    std::optional<RleMask> mask;

    bool operator==(const Detection&) const = default;
};

// Predictions and ground truth of one image.
struct ImageDetections {
    std::string image_id;
    std::vector<Detection> predictions;
    std::vector<Detection> ground_truth;
};

double box_iou(const Box& a, const Box& b);

struct Overlap {
    double iou = 0.0;
    double dice = 0.0;
};

// Both-empty convention: IoU = Dice = 1.
Overlap mask_iou_dice(const Mask& pred, const Mask& gt);
Overlap box_iou_dice(const Box& pred, const Box& gt);

// Per-class greedy suppression of boxes with IoU > iou_threshold, highest
// score first (ties keep input order); at most max_det survivors.
std::vector<std::size_t> nms_indices(std::span<const Detection> dets, double iou_threshold,
                                     std::size_t max_det);
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold, std::size_t max_det);

struct MatchResult {
    std::vector<int> pred_to_gt;  // -1 for false positives
    std::vector<double> pred_iou; // IoU with the matched GT, 0 otherwise
    std::vector<int> gt_to_pred;  // -1 for false negatives
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

// Greedy by descending score: each prediction takes the unmatched same-class
// GT of highest IoU, provided IoU >= iou_threshold.
MatchResult match_detections(std::span<const Detection> preds, std::span<const Detection> gts,
                             double iou_threshold, bool use_mask_iou);

struct Counts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct PrecisionRecall {
    double precision = 1.0;
    double recall = 1.0;
};

// 0/0 is 1 for both: no predictions means no false alarms, no GTs means nothing missed.
PrecisionRecall precision_recall(const Counts& counts);

struct ScoredMatch {
    double score = 0.0;
    bool true_positive = false;
};

struct PRCurve {
    int class_id = 0;
    double iou_threshold = 0.5;
    std::vector<std::array<double, 2>> points;  // (recall, precision), recall non-decreasing
};

PRCurve pr_curve(std::span<const ScoredMatch> matches, std::size_t num_gt, double iou_threshold,
                 int class_id = 0);

// All-points interpolated AP: integral over recall of the monotone precision envelope.
double average_precision(std::span<const ScoredMatch> matches, std::size_t num_gt);

inline constexpr std::array<double, 10> kCocoThresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                                           0.75, 0.80, 0.85, 0.90, 0.95};

struct MapResult {
    std::size_t num_classes = 0;
    std::vector<bool> class_has_gt;
    std::vector<std::array<double, 10>> ap;  // [class][threshold]
    std::array<double, 10> map_at{};         // class-mean AP per threshold
    double map50 = 0.0;
    double map50_95 = 0.0;
};

// Classes without any GT across the dataset are left out of the class mean.
MapResult map_range(std::span<const ImageDetections> images, std::size_t num_classes, bool use_mask_iou);

// (num_classes + 1)^2, row = predicted class, column = true class; index
// num_classes is background. Matching is class-agnostic at iou_threshold.
struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<double> cells;

    double at(std::size_t predicted, std::size_t actual) const {
        return cells[predicted * (num_classes + 1) + actual];
    }
    double& at(std::size_t predicted, std::size_t actual) {
        return cells[predicted * (num_classes + 1) + actual];
    }
};

ConfusionMatrix confusion_matrix(std::span<const ImageDetections> images, std::size_t num_classes,
                                 double iou_threshold, bool use_mask_iou, bool normalize);

struct MetricsReport {
    MapResult map;
    Counts counts;          // at IoU 0.5 over predictions with score >= conf_threshold
    double precision = 1.0;
    double recall = 1.0;
    double mean_iou = 1.0;  // over GT instances; misses count as 0
    double mean_dice = 1.0;
    ConfusionMatrix confusion;  // column-normalized
};

MetricsReport evaluate(std::span<const ImageDetections> images, std::size_t num_classes,
                       bool use_mask_iou, double conf_threshold = 0.0);

// Pixelwise ROC AUC of a score map against a binary mask (ties share ranks).
double pixel_auroc(const Tensor& scores, const Mask& labels);

}  // namespace wafertex

#include "wafertex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wafertex {

namespace {

std::vector<std::size_t> by_score_desc(std::span<const Detection> dets) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    return order;
}

Overlap pair_overlap(const Detection& pred, const Detection& gt, bool use_mask) {
    if (!use_mask) return box_iou_dice(pred.box, gt.box);
    if (!pred.mask || !gt.mask) throw std::invalid_argument("mask metrics need masks on both sides");
    return mask_iou_dice(rle_decode(*pred.mask), rle_decode(*gt.mask));
}

// Full IoU table [pred][gt]; masks are decoded once.
std::vector<std::vector<double>> iou_table(std::span<const Detection> preds,
                                           std::span<const Detection> gts, bool use_mask) {
    std::vector<std::vector<double>> table(preds.size(), std::vector<double>(gts.size(), 0.0));
    if (!use_mask) {
        for (std::size_t p = 0; p < preds.size(); ++p)
            for (std::size_t g = 0; g < gts.size(); ++g) table[p][g] = box_iou(preds[p].box, gts[g].box);
        return table;
    }
    std::vector<Mask> gm;
    gm.reserve(gts.size());
    for (const auto& g : gts) {
        if (!g.mask) throw std::invalid_argument("mask IoU requested but a ground-truth has no mask");
        gm.push_back(rle_decode(*g.mask));
    }
    for (std::size_t p = 0; p < preds.size(); ++p) {
        if (gts.empty()) break;
        if (!preds[p].mask) throw std::invalid_argument("mask IoU requested but a prediction has no mask");
        const Mask pm = rle_decode(*preds[p].mask);
        for (std::size_t g = 0; g < gts.size(); ++g) table[p][g] = mask_iou_dice(pm, gm[g]).iou;
    }
    return table;
}

MatchResult greedy_match(std::span<const Detection> preds, std::span<const Detection> gts,
                         const std::vector<std::vector<double>>& table, double threshold,
                         bool class_aware) {
    MatchResult r;
    r.pred_to_gt.assign(preds.size(), -1);
    r.pred_iou.assign(preds.size(), 0.0);
    r.gt_to_pred.assign(gts.size(), -1);
    for (const std::size_t p : by_score_desc(preds)) {
        int best = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (r.gt_to_pred[g] >= 0) continue;
            if (class_aware && gts[g].class_id != preds[p].class_id) continue;
            const double iou = table[p][g];
            if (iou >= threshold && (best < 0 || iou > best_iou)) {
                best = static_cast<int>(g);
                best_iou = iou;
            }
        }
        if (best >= 0) {
            r.pred_to_gt[p] = best;
            r.pred_iou[p] = best_iou;
            r.gt_to_pred[static_cast<std::size_t>(best)] = static_cast<int>(p);
            ++r.tp;
        } else {
            ++r.fp;
        }
    }
    r.fn = gts.size() - r.tp;
    return r;
}

void check_classes(std::span<const ImageDetections> images, std::size_t num_classes) {
    if (num_classes == 0) throw std::invalid_argument("metrics: need at least one class");
    for (const auto& img : images) {
        for (const auto* list : {&img.predictions, &img.ground_truth}) {
            for (const auto& d : *list) {
                if (d.class_id < 0 || static_cast<std::size_t>(d.class_id) >= num_classes) {
                    throw std::invalid_argument("metrics: class id " + std::to_string(d.class_id) +
                                                " in image '" + img.image_id + "' outside [0, " +
                                                std::to_string(num_classes) + ")");
                }
            }
        }
    }
}

}  // namespace

double box_iou(const Box& a, const Box& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

Overlap mask_iou_dice(const Mask& pred, const Mask& gt) {
    if (!pred.same_shape(gt)) {
        throw std::invalid_argument("mask_iou_dice: shape mismatch " + pred.shape_string() + " vs " +
                                    gt.shape_string());
    }
    std::size_t inter = 0;
    std::size_t np = 0;
    std::size_t ng = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred[i] != 0;
        const bool b = gt[i] != 0;
        np += a;
        ng += b;
        inter += a && b;
    }
    if (np + ng == 0) return {1.0, 1.0};
    const double uni = static_cast<double>(np + ng - inter);
    return {static_cast<double>(inter) / uni, 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng)};
}

Overlap box_iou_dice(const Box& pred, const Box& gt) {
    const double iou = box_iou(pred, gt);
    return {iou, 2.0 * iou / (1.0 + iou)};
}

std::vector<std::size_t> nms_indices(std::span<const Detection> dets, double iou_threshold,
                                     std::size_t max_det) {
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
        throw std::invalid_argument("nms: IoU threshold must lie in [0, 1]");
    }
    std::vector<std::size_t> kept;
    for (const std::size_t i : by_score_desc(dets)) {
        if (kept.size() >= max_det) break;
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
            return dets[k].class_id == dets[i].class_id && box_iou(dets[k].box, dets[i].box) > iou_threshold;
        });
        if (!suppressed) kept.push_back(i);
    }
    return kept;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold, std::size_t max_det) {
    std::vector<Detection> out;
    for (const std::size_t i : nms_indices(dets, iou_threshold, max_det)) out.push_back(dets[i]);
    return out;
}

MatchResult match_detections(std::span<const Detection> preds, std::span<const Detection> gts,
                             double iou_threshold, bool use_mask_iou) {
    return greedy_match(preds, gts, iou_table(preds, gts, use_mask_iou), iou_threshold, true);
}

PrecisionRecall precision_recall(const Counts& c) {
    PrecisionRecall pr;
    if (c.tp + c.fp > 0) pr.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) pr.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    return pr;
}

PRCurve pr_curve(std::span<const ScoredMatch> matches, std::size_t num_gt, double iou_threshold,
                 int class_id) {
    if (num_gt == 0) throw std::invalid_argument("pr_curve: no ground truth");
    std::vector<std::size_t> order(matches.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return matches[a].score > matches[b].score; });
    PRCurve curve;
    curve.class_id = class_id;
    curve.iou_threshold = iou_threshold;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        tp += matches[order[k]].true_positive;
        curve.points.push_back({static_cast<double>(tp) / static_cast<double>(num_gt),
                                static_cast<double>(tp) / static_cast<double>(k + 1)});
    }
    return curve;
}

double average_precision(std::span<const ScoredMatch> matches, std::size_t num_gt) {
    if (num_gt == 0) throw std::invalid_argument("average_precision: undefined without ground truth");
    const PRCurve curve = pr_curve(matches, num_gt, 0.5);
    const auto& pts = curve.points;
    std::vector<double> envelope(pts.size());
    double running = 0.0;
    for (std::size_t k = pts.size(); k-- > 0;) {
        running = std::max(running, pts[k][1]);
        envelope[k] = running;
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        if (pts[k][0] > prev_recall) {
            ap += (pts[k][0] - prev_recall) * envelope[k];
            prev_recall = pts[k][0];
        }
    }
    return ap;
}

MapResult map_range(std::span<const ImageDetections> images, std::size_t num_classes, bool use_mask_iou) {
    check_classes(images, num_classes);
    MapResult result;
    result.num_classes = num_classes;
    result.class_has_gt.assign(num_classes, false);
    result.ap.assign(num_classes, {});

    std::vector<std::size_t> gt_count(num_classes, 0);
    for (const auto& img : images)
        for (const auto& g : img.ground_truth) ++gt_count[static_cast<std::size_t>(g.class_id)];
    for (std::size_t c = 0; c < num_classes; ++c) result.class_has_gt[c] = gt_count[c] > 0;
    const std::size_t counted = static_cast<std::size_t>(
        std::count(result.class_has_gt.begin(), result.class_has_gt.end(), true));

    std::vector<std::vector<std::vector<double>>> tables;
    tables.reserve(images.size());
    for (const auto& img : images) tables.push_back(iou_table(img.predictions, img.ground_truth, use_mask_iou));

    for (std::size_t t = 0; t < kCocoThresholds.size(); ++t) {
        std::vector<std::vector<ScoredMatch>> per_class(num_classes);
        for (std::size_t i = 0; i < images.size(); ++i) {
            const auto& img = images[i];
            const MatchResult m =
                greedy_match(img.predictions, img.ground_truth, tables[i], kCocoThresholds[t], true);
            for (std::size_t p = 0; p < img.predictions.size(); ++p) {
                per_class[static_cast<std::size_t>(img.predictions[p].class_id)].push_back(
                    {img.predictions[p].score, m.pred_to_gt[p] >= 0});
            }
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < num_classes; ++c) {
            if (!result.class_has_gt[c]) continue;
            result.ap[c][t] = average_precision(per_class[c], gt_count[c]);
            sum += result.ap[c][t];
        }
        result.map_at[t] = counted > 0 ? sum / static_cast<double>(counted) : 0.0;
    }
    result.map50 = result.map_at[0];
    double total = 0.0;
    for (const double v : result.map_at) total += v;
    result.map50_95 = total / static_cast<double>(kCocoThresholds.size());
    return result;
}

ConfusionMatrix confusion_matrix(std::span<const ImageDetections> images, std::size_t num_classes,
                                 double iou_threshold, bool use_mask_iou, bool normalize) {
    check_classes(images, num_classes);
    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.cells.assign((num_classes + 1) * (num_classes + 1), 0.0);
    const std::size_t bg = num_classes;
    for (const auto& img : images) {
        const auto table = iou_table(img.predictions, img.ground_truth, use_mask_iou);
        const MatchResult m = greedy_match(img.predictions, img.ground_truth, table, iou_threshold, false);
        for (std::size_t p = 0; p < img.predictions.size(); ++p) {
            const auto pc = static_cast<std::size_t>(img.predictions[p].class_id);
            if (m.pred_to_gt[p] >= 0) {
                const auto gc =
                    static_cast<std::size_t>(img.ground_truth[static_cast<std::size_t>(m.pred_to_gt[p])].class_id);
                cm.at(pc, gc) += 1.0;
            } else {
                cm.at(pc, bg) += 1.0;
            }
        }
        for (std::size_t g = 0; g < img.ground_truth.size(); ++g) {
            if (m.gt_to_pred[g] < 0) cm.at(bg, static_cast<std::size_t>(img.ground_truth[g].class_id)) += 1.0;
        }
    }
    if (normalize) {
        for (std::size_t col = 0; col <= num_classes; ++col) {
            double sum = 0.0;
            for (std::size_t row = 0; row <= num_classes; ++row) sum += cm.at(row, col);
            if (sum == 0.0) continue;  // empty columns stay zero
            for (std::size_t row = 0; row <= num_classes; ++row) cm.at(row, col) /= sum;
        }
    }
    return cm;
}

MetricsReport evaluate(std::span<const ImageDetections> images, std::size_t num_classes,
                       bool use_mask_iou, double conf_threshold) {
    MetricsReport report;
    report.map = map_range(images, num_classes, use_mask_iou);
    report.confusion = confusion_matrix(images, num_classes, 0.5, use_mask_iou, true);

    double iou_sum = 0.0;
    double dice_sum = 0.0;
    std::size_t gt_total = 0;
    for (const auto& img : images) {
        std::vector<Detection> confident;
        for (const auto& d : img.predictions)
            if (d.score >= conf_threshold) confident.push_back(d);
        const MatchResult m = match_detections(confident, img.ground_truth, 0.5, use_mask_iou);
        report.counts.tp += m.tp;
        report.counts.fp += m.fp;
        report.counts.fn += m.fn;
        for (std::size_t g = 0; g < img.ground_truth.size(); ++g) {
            ++gt_total;
            if (m.gt_to_pred[g] < 0) continue;
            const Overlap o = pair_overlap(confident[static_cast<std::size_t>(m.gt_to_pred[g])],
                                           img.ground_truth[g], use_mask_iou);
            iou_sum += o.iou;
            dice_sum += o.dice;
        }
    }
    const PrecisionRecall pr = precision_recall(report.counts);
    report.precision = pr.precision;
    report.recall = pr.recall;
    if (gt_total > 0) {
        report.mean_iou = iou_sum / static_cast<double>(gt_total);
        report.mean_dice = dice_sum / static_cast<double>(gt_total);
    }
    return report;
}

double pixel_auroc(const Tensor& scores, const Mask& labels) {
    if (scores.channels() != 1 || labels.channels() != 1 || scores.height() != labels.height() ||
        scores.width() != labels.width()) {
        throw std::invalid_argument("pixel_auroc: score map " + scores.shape_string() +
                                    " does not match mask " + labels.shape_string());
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] != 0) {
                positive_rank_sum += rank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw std::invalid_argument("pixel_auroc: mask must contain both classes");
    }
    const double np = static_cast<double>(positives);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

}  // namespace wafertex

/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "surgpipe/calib.hpp"
#include "surgpipe/core.hpp"
#include "surgpipe/errors.hpp"

namespace surgpipe::metrics {

struct EvalConfig {
  /// IoU a prediction must reach against a ground-truth box to count as TP.
  double iou_match = 0.5;
  /// When false, detections flagged from_track are ignored.
  bool include_track_boxes = true;
};

inline void validate(const EvalConfig& cfg) {
  if (!(cfg.iou_match > 0.0 && cfg.iou_match <= 1.0)) {
    throw ConfigError("EvalConfig: iou_match must be in (0,1]");
  }
}

/// Per-class F1 plus macro mean. Classes with neither truth positives nor
/// predicted positives are undefined and excluded from the macro mean;
/// classes with predictions but no truth positives score 0.
struct MultilabelF1 {
  std::vector<double> per_class;
  std::vector<std::uint8_t> defined;
  double macro = 0.0;
};

inline MultilabelF1 multilabel_f1(const BinaryMatrix& pred,
                                  const BinaryMatrix& truth) {
  if (pred.rows != truth.rows || pred.cols != truth.cols) {
    throw ShapeError("multilabel_f1: shape mismatch");
  }
  MultilabelF1 out;
  out.per_class.assign(pred.cols, 0.0);
  out.defined.assign(pred.cols, 0);
  double sum = 0.0;
  std::size_t n_defined = 0;
  for (std::size_t c = 0; c < pred.cols; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t n = 0; n < pred.rows; ++n) {
      const bool p = pred.at(n, c) != 0;
      const bool t = truth.at(n, c) != 0;
      if (p && t) ++tp;
      if (p && !t) ++fp;
      if (!p && t) ++fn;
    }
    if (tp + fp + fn == 0) continue;  // no positives anywhere: undefined
    const double f1 = 2.0 * static_cast<double>(tp) /
                      static_cast<double>(2 * tp + fp + fn);
    out.per_class[c] = f1;
    out.defined[c] = 1;
    sum += f1;
    ++n_defined;
  }
  out.macro = n_defined == 0 ? 0.0 : sum / static_cast<double>(n_defined);
  return out;
}

/// Box of one class within one frame; score ignored for ground truth.
struct ScoredBox {
  std::int64_t frame_id = 0;
  BoundingBox box;
  double score = 0.0;
};

namespace detail {

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Greedy matching shared by AP and the report counts. Predictions are
/// visited in descending score (ties: lower frame_id, then lexicographic
/// box) and matched to the unmatched same-frame ground-truth box of highest
/// IoU >= iou_match (IoU ties: lexicographically smaller box). Returns the
/// per-prediction TP flags in visit order.
inline std::vector<std::uint8_t> greedy_match(
    std::vector<ScoredBox> preds,
    const std::vector<ScoredBox>& gts, double iou_match,
    MatchCounts* counts) {
  std::sort(preds.begin(), preds.end(),
            [](const ScoredBox& a, const ScoredBox& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.frame_id != b.frame_id) return a.frame_id < b.frame_id;
              return box_less(a.box, b.box);
            });

  std::map<std::int64_t, std::vector<std::size_t>> gt_by_frame;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gt_by_frame[gts[g].frame_id].push_back(g);
  }
  std::vector<std::uint8_t> gt_used(gts.size(), 0);

  std::vector<std::uint8_t> is_tp(preds.size(), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const ScoredBox& p = preds[i];
    const auto it = gt_by_frame.find(p.frame_id);
    if (it == gt_by_frame.end()) continue;
    double best_iou = 0.0;
    std::size_t best_g = gts.size();
    for (std::size_t g : it->second) {
      if (gt_used[g]) continue;
      const double overlap = iou(p.box, gts[g].box);
      if (overlap > best_iou ||
          (overlap == best_iou && best_g < gts.size() && overlap > 0.0 &&
           box_less(gts[g].box, gts[best_g].box))) {
        best_iou = overlap;
        best_g = g;
      }
    }
    if (best_g < gts.size() && best_iou >= iou_match) {
      gt_used[best_g] = 1;
      is_tp[i] = 1;
    }
  }

  if (counts != nullptr) {
    counts->tp = static_cast<std::size_t>(
        std::count(is_tp.begin(), is_tp.end(), std::uint8_t{1}));
    counts->fp = preds.size() - counts->tp;
    counts->fn = gts.size() - counts->tp;
  }
  return is_tp;
}

}  // namespace detail

/// All-point average precision for one class: exact area under the
/// precision envelope of the greedy-matched PR sequence.
inline double average_precision(std::span<const ScoredBox> preds,
                                std::span<const ScoredBox> gts,
                                double iou_match = 0.5,
                                detail::MatchCounts* counts = nullptr) {
  if (gts.empty()) {
    throw EmptyGroundTruthError("average_precision: no ground-truth boxes");
  }
  const std::vector<std::uint8_t> is_tp = detail::greedy_match(
      std::vector<ScoredBox>(preds.begin(), preds.end()),
      std::vector<ScoredBox>(gts.begin(), gts.end()), iou_match, counts);
  if (is_tp.empty()) return 0.0;

  const auto n_gt = static_cast<double>(gts.size());
  std::vector<double> precision(is_tp.size());
  std::vector<double> recall(is_tp.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < is_tp.size(); ++i) {
    tp += is_tp[i];
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / n_gt;
  }
  for (std::size_t i = precision.size() - 1; i-- > 0;) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

struct EvalReport {
  /// Localization: per-class AP where the class has ground truth.
  std::vector<double> per_class_ap;
  std::vector<std::uint8_t> ap_defined;
  double mean_ap = 0.0;
  /// Presence classification derived from per-frame box presence.
  std::vector<double> per_class_f1;
  std::vector<std::uint8_t> f1_defined;
  double mean_f1 = 0.0;
  /// Box-level matching counts per class.
  std::vector<std::size_t> tp;
  std::vector<std::size_t> fp;
  std::vector<std::size_t> fn;
};

/// Evaluates predictions against ground truth: per-class AP and mAP over
/// classes with ground truth, plus presence F1 computed on per-frame
/// class-presence indicators. Missing frame_ids on either side are treated
/// as empty frames.
inline EvalReport mean_ap(std::span<const FrameDetections> pred,
                          std::span<const FrameDetections> gt,
                          const EvalConfig& cfg = {}) {
  validate(cfg);

  int max_class = -1;
  std::map<std::int64_t, std::size_t> frame_rows;
  for (const FrameDetections& f : gt) {
    frame_rows.emplace(f.frame_id, 0);
    for (const Detection& d : f.detections) {
      max_class = std::max(max_class, d.class_id);
    }
  }
  bool any_gt = false;
  for (const FrameDetections& f : gt) {
    if (!f.detections.empty()) any_gt = true;
  }
  if (!any_gt) {
    throw EmptyGroundTruthError("mean_ap: ground truth has no boxes");
  }
  for (const FrameDetections& f : pred) {
    frame_rows.emplace(f.frame_id, 0);
    for (const Detection& d : f.detections) {
      max_class = std::max(max_class, d.class_id);
    }
  }
  const auto n_classes = static_cast<std::size_t>(max_class + 1);
  std::size_t row = 0;
  for (auto& [frame_id, index] : frame_rows) index = row++;

  std::vector<std::vector<ScoredBox>> pred_by_class(n_classes);
  std::vector<std::vector<ScoredBox>> gt_by_class(n_classes);
  BinaryMatrix pred_presence = BinaryMatrix::zeros(frame_rows.size(),
                                                   n_classes);
  BinaryMatrix gt_presence = BinaryMatrix::zeros(frame_rows.size(),
                                                 n_classes);
  for (const FrameDetections& f : pred) {
    for (const Detection& d : f.detections) {
      if (!cfg.include_track_boxes && d.from_track) continue;
      const auto c = static_cast<std::size_t>(d.class_id);
      pred_by_class[c].push_back(ScoredBox{f.frame_id, d.box, d.score});
      pred_presence.at(frame_rows.at(f.frame_id), c) = 1;
    }
  }
  for (const FrameDetections& f : gt) {
    for (const Detection& d : f.detections) {
      const auto c = static_cast<std::size_t>(d.class_id);
      gt_by_class[c].push_back(ScoredBox{f.frame_id, d.box, 1.0});
      gt_presence.at(frame_rows.at(f.frame_id), c) = 1;
    }
  }

  EvalReport report;
  report.per_class_ap.assign(n_classes, 0.0);
  report.ap_defined.assign(n_classes, 0);
  report.tp.assign(n_classes, 0);
  report.fp.assign(n_classes, 0);
  report.fn.assign(n_classes, 0);
  double ap_sum = 0.0;
  std::size_t ap_count = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (gt_by_class[c].empty()) {
      report.fp[c] = pred_by_class[c].size();
      continue;
    }
    detail::MatchCounts counts;
    const double ap = average_precision(pred_by_class[c], gt_by_class[c],
                                        cfg.iou_match, &counts);
    report.per_class_ap[c] = ap;
    report.ap_defined[c] = 1;
    report.tp[c] = counts.tp;
    report.fp[c] = counts.fp;
    report.fn[c] = counts.fn;
    ap_sum += ap;
    ++ap_count;
  }
  report.mean_ap = ap_count == 0 ? 0.0 : ap_sum / static_cast<double>(ap_count);

  const MultilabelF1 f1 = multilabel_f1(pred_presence, gt_presence);
  report.per_class_f1 = f1.per_class;
  report.f1_defined = f1.defined;
  report.mean_f1 = f1.macro;
  return report;
}

}  // namespace surgpipe::metrics

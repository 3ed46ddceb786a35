/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "surgpipe/core.hpp"
#include "surgpipe/errors.hpp"

namespace surgpipe::cam2box {

enum class ThresholdMode { kOtsu, kFixed };

/// Knobs of the heatmap -> boxes conversion.
struct LocalizeConfig {
  ThresholdMode threshold_mode = ThresholdMode::kOtsu;
  /// Threshold applied to the min-max normalized map in kFixed mode.
  double fixed_sigma = 0.5;
  /// A class is localized only when sigmoid(mean activation) exceeds this.
  double presence_threshold = 0.5;
  /// Components with fewer pixels are discarded; 1 disables the filter.
  std::size_t min_component_area = 4;
  /// A candidate box is kept only if its IoU with every previously kept box
  /// is strictly below this value.
  double dedup_iou = 0.5;
  int connectivity = 8;  // 4 or 8
  std::size_t histogram_bins = 256;
  /// Output boxes are scaled by these factors (frame_w / W', frame_h / H')
  /// so maps stay unresampled while boxes land in frame pixels.
  double scale_x = 1.0;
  double scale_y = 1.0;
};

inline void validate(const LocalizeConfig& cfg) {
  if (!(cfg.presence_threshold > 0.0 && cfg.presence_threshold < 1.0)) {
    throw ConfigError("LocalizeConfig: presence_threshold must be in (0,1)");
  }
  if (!(cfg.dedup_iou >= 0.0 && cfg.dedup_iou <= 1.0)) {
    throw ConfigError("LocalizeConfig: dedup_iou must be in [0,1]");
  }
  if (cfg.min_component_area < 1) {
    throw ConfigError("LocalizeConfig: min_component_area must be >= 1");
  }
  if (cfg.connectivity != 4 && cfg.connectivity != 8) {
    throw ConfigError("LocalizeConfig: connectivity must be 4 or 8");
  }
  if (cfg.histogram_bins < 2) {
    throw ConfigError("LocalizeConfig: histogram_bins must be >= 2");
  }
  if (!(cfg.scale_x > 0.0) || !(cfg.scale_y > 0.0)) {
    throw ConfigError("LocalizeConfig: scale factors must be > 0");
  }
}

/// Per-pixel boolean map, row-major.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  bool test(std::size_t y, std::size_t x) const {
    return bits[y * width + x] != 0;
  }
};

/// One connected region of set pixels.
struct Component {
  /// Linear row-major pixel indices, ascending.
  std::vector<std::size_t> pixels;
  /// Minimal enclosing box in half-open pixel coordinates.
  BoundingBox box;

  std::size_t area() const { return pixels.size(); }
};

/// Elementwise arithmetic mean of equally shaped stacks.
inline HeatmapStack average_maps(std::span<const HeatmapStack> maps) {
  if (maps.empty()) throw EmptyInputError("average_maps: no input maps");
  const HeatmapStack& first = maps.front();
  for (const HeatmapStack& m : maps) {
    if (!m.same_shape(first)) {
      throw ShapeError("average_maps: input shapes differ");
    }
  }
  HeatmapStack out(first.frames(), first.classes(), first.height(),
                   first.width());
  const double inv = 1.0 / static_cast<double>(maps.size());
  std::span<double> acc = out.data();
  for (const HeatmapStack& m : maps) {
    std::span<const double> src = m.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
  }
  for (double& v : acc) v *= inv;
  return out;
}

/// Histogram threshold maximizing between-class variance.
///
/// The histogram has `bins` equal-width bins spanning [min, max] of the
/// input. Candidate k splits bins [0..k] from [k+1..bins-1]; the returned
/// threshold is the right edge of bin k. Ties are broken toward the lowest
/// threshold.
inline double otsu_threshold(std::span<const double> values,
                             std::size_t bins = 256) {
  if (values.empty()) throw EmptyInputError("otsu_threshold: empty input");
  if (bins < 2) throw ConfigError("otsu_threshold: bins must be >= 2");
  const auto [lo_it, hi_it] =
      std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo == hi) {
    throw NoSeparationError("otsu_threshold: all values equal");
  }

  std::vector<double> hist(bins, 0.0);
  const double range = hi - lo;
  for (double v : values) {
    auto bin = static_cast<std::size_t>((v - lo) / range *
                                        static_cast<double>(bins));
    if (bin >= bins) bin = bins - 1;
    hist[bin] += 1.0;
  }

  const auto total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    sum_all += static_cast<double>(i) * hist[i];
  }

  double w0 = 0.0;
  double s0 = 0.0;
  double best_var = -1.0;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < bins; ++k) {
    w0 += hist[k];
    s0 += static_cast<double>(k) * hist[k];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = s0 / w0;
    const double mu1 = (sum_all - s0) / w1;
    const double diff = mu0 - mu1;
    const double var = w0 * w1 * diff * diff;
    if (var > best_var) {
      best_var = var;
      best_k = k;
    }
  }
  return lo + static_cast<double>(best_k + 1) *
                  (range / static_cast<double>(bins));
}

/// Pixel set iff value > threshold (strict).
inline BinaryMask binarize(const MapView& map, double threshold) {
  BinaryMask mask{map.height, map.width,
                  std::vector<std::uint8_t>(map.height * map.width, 0)};
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    mask.bits[i] = map.values[i] > threshold ? 1 : 0;
  }
  return mask;
}

/// Labels connected regions of set pixels (BFS). Components are ordered by
/// their first pixel in row-major scan order; each pixel list is ascending.
inline std::vector<Component> connected_components(const BinaryMask& mask,
                                                   int connectivity = 8) {
  if (connectivity != 4 && connectivity != 8) {
    throw ConfigError("connected_components: connectivity must be 4 or 8");
  }
  const std::size_t h = mask.height;
  const std::size_t w = mask.width;
  static constexpr int dx4[] = {1, -1, 0, 0};
  static constexpr int dy4[] = {0, 0, 1, -1};
  static constexpr int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int* dx = connectivity == 4 ? dx4 : dx8;
  const int* dy = connectivity == 4 ? dy4 : dy8;
  const int n_dirs = connectivity == 4 ? 4 : 8;

  std::vector<std::uint8_t> visited(h * w, 0);
  std::vector<Component> components;
  std::vector<std::size_t> queue;

  for (std::size_t start = 0; start < h * w; ++start) {
    if (!mask.bits[start] || visited[start]) continue;
    queue.clear();
    queue.push_back(start);
    visited[start] = 1;
    std::size_t min_x = w, max_x = 0, min_y = h, max_y = 0;
    std::size_t head = 0;
    while (head < queue.size()) {
      const std::size_t p = queue[head++];
      const std::size_t y = p / w;
      const std::size_t x = p % w;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
      for (int d = 0; d < n_dirs; ++d) {
        const auto nx = static_cast<std::int64_t>(x) + dx[d];
        const auto ny = static_cast<std::int64_t>(y) + dy[d];
        if (nx < 0 || ny < 0 || nx >= static_cast<std::int64_t>(w) ||
            ny >= static_cast<std::int64_t>(h)) {
          continue;
        }
        const std::size_t q = static_cast<std::size_t>(ny) * w +
                              static_cast<std::size_t>(nx);
        if (mask.bits[q] && !visited[q]) {
          visited[q] = 1;
          queue.push_back(q);
        }
      }
    }
    Component comp;
    comp.pixels = queue;
    std::sort(comp.pixels.begin(), comp.pixels.end());
    comp.box = BoundingBox{static_cast<double>(min_x),
                           static_cast<double>(min_y),
                           static_cast<double>(max_x + 1),
                           static_cast<double>(max_y + 1)};
    components.push_back(std::move(comp));
  }
  return components;
}

/// Greedy duplicate suppression. Candidates are visited in descending score
/// (ties: lower class id, then lexicographic box); a candidate is kept iff
/// its IoU with every previously kept box is strictly below `dedup_iou`.
inline std::vector<Detection> dedup_boxes(std::vector<Detection> dets,
                                          double dedup_iou) {
  if (!(dedup_iou >= 0.0 && dedup_iou <= 1.0)) {
    throw ConfigError("dedup_boxes: dedup_iou must be in [0,1]");
  }
  std::sort(dets.begin(), dets.end(),
            [](const Detection& a, const Detection& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.class_id != b.class_id) return a.class_id < b.class_id;
              return box_less(a.box, b.box);
            });
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    const bool clear = std::all_of(
        kept.begin(), kept.end(),
        [&](const Detection& k) { return iou(k.box, d.box) < dedup_iou; });
    if (clear) kept.push_back(d);
  }
  return kept;
}

struct LocalizeResult {
  FrameDetections frame;
  /// Classes whose maps could not be thresholded (constant activation).
  std::vector<std::string> warnings;
};

/// Converts one frame of a heatmap stack into scored boxes.
///
/// Presence probability per class is sigmoid(mean raw activation); classes
/// strictly above `presence_threshold` are processed in descending
/// probability. Each selected class map is min-max normalized to [0,1],
/// thresholded (Otsu or fixed sigma), decomposed into connected components,
/// filtered by `min_component_area`, then scored as
/// presence * (peak normalized activation in the component). Finally
/// dedup_boxes is applied across all classes.
inline LocalizeResult localize_frame(const HeatmapStack& stack,
                                     std::size_t frame,
                                     const LocalizeConfig& cfg = {}) {
  validate(cfg);
  if (frame >= stack.frames()) {
    throw ConfigError("localize_frame: frame index out of range");
  }

  struct Selected {
    int class_id;
    double probability;
  };
  std::vector<Selected> selected;
  for (std::size_t c = 0; c < stack.classes(); ++c) {
    const MapView view = stack.map_view(frame, c);
    double sum = 0.0;
    for (double v : view.values) sum += v;
    const double prob = sigmoid(sum / static_cast<double>(view.values.size()));
    if (prob > cfg.presence_threshold) {
      selected.push_back({static_cast<int>(c), prob});
    }
  }
  std::sort(selected.begin(), selected.end(),
            [](const Selected& a, const Selected& b) {
              if (a.probability != b.probability) {
                return a.probability > b.probability;
              }
              return a.class_id < b.class_id;
            });

  LocalizeResult result;
  result.frame.frame_id = static_cast<std::int64_t>(frame);
  std::vector<Detection> candidates;
  std::vector<double> normalized(stack.height() * stack.width());

  for (const Selected& sel : selected) {
    const MapView view =
        stack.map_view(frame, static_cast<std::size_t>(sel.class_id));
    const auto [lo_it, hi_it] =
        std::minmax_element(view.values.begin(), view.values.end());
    if (*lo_it == *hi_it) {
      result.warnings.push_back("class " + std::to_string(sel.class_id) +
                                ": constant activation map, no boxes");
      continue;
    }
    const double lo = *lo_it;
    const double inv_range = 1.0 / (*hi_it - lo);
    for (std::size_t i = 0; i < normalized.size(); ++i) {
      normalized[i] = (view.values[i] - lo) * inv_range;
    }

    double threshold;
    if (cfg.threshold_mode == ThresholdMode::kOtsu) {
      try {
        threshold = otsu_threshold(normalized, cfg.histogram_bins);
      } catch (const NoSeparationError&) {
        result.warnings.push_back("class " + std::to_string(sel.class_id) +
                                  ": no threshold separation, no boxes");
        continue;
      }
    } else {
      threshold = cfg.fixed_sigma;
    }

    const BinaryMask mask = binarize(
        MapView{stack.height(), stack.width(), normalized}, threshold);
    for (const Component& comp :
         connected_components(mask, cfg.connectivity)) {
      if (comp.area() < cfg.min_component_area) continue;
      double peak = 0.0;
      for (std::size_t p : comp.pixels) peak = std::max(peak, normalized[p]);
      candidates.push_back(
          Detection{comp.box, sel.class_id, sel.probability * peak, false});
    }
  }

  result.frame.detections = dedup_boxes(std::move(candidates), cfg.dedup_iou);
  if (cfg.scale_x != 1.0 || cfg.scale_y != 1.0) {
    for (Detection& d : result.frame.detections) {
      d.box.x_min *= cfg.scale_x;
      d.box.x_max *= cfg.scale_x;
      d.box.y_min *= cfg.scale_y;
      d.box.y_max *= cfg.scale_y;
    }
  }
  return result;
}

}  // namespace surgpipe::cam2box

/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "surgpipe/errors.hpp"

namespace surgpipe {

/// Axis-aligned box with half-open extents [x_min, x_max) x [y_min, y_max),
/// so that area on an integer grid is exactly width * height.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline bool is_valid(const BoundingBox& b) {
  return b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_min < b.x_max &&
         b.y_min < b.y_max && std::isfinite(b.x_min) && std::isfinite(b.y_min) &&
         std::isfinite(b.x_max) && std::isfinite(b.y_max);
}

/// Lexicographic order on (x_min, y_min, x_max, y_max); used for tie-breaking.
inline bool box_less(const BoundingBox& a, const BoundingBox& b) {
  if (a.x_min != b.x_min) return a.x_min < b.x_min;
  if (a.y_min != b.y_min) return a.y_min < b.y_min;
  if (a.x_max != b.x_max) return a.x_max < b.x_max;
  return a.y_max < b.y_max;
}

/// Intersection over union of two valid boxes. Symmetric; 0 when disjoint;
/// exactly 1 for identical boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix =
      std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy =
      std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

/// A scored, classified box.
struct Detection {
  BoundingBox box;
  int class_id = 0;
  double score = 0.0;
  /// Set when the box was emitted by the tracker rather than a detector.
  bool from_track = false;
};

/// All detections of one frame.
struct FrameDetections {
  std::int64_t frame_id = 0;
  std::vector<Detection> detections;
};

/// Numerically stable logistic function; sigmoid(0) == 0.5 exactly.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline constexpr double kBlankEpsilon = 1.0 / 255.0;

/// True when every pixel of a grayscale frame is below `epsilon`.
inline bool is_blank_frame(std::span<const double> pixels,
                           double epsilon = kBlankEpsilon) {
  if (pixels.empty()) throw EmptyInputError("is_blank_frame: empty image");
  return *std::max_element(pixels.begin(), pixels.end()) < epsilon;
}

/// Read-only view of one H x W activation map, row-major.
struct MapView {
  std::size_t height = 0;
  std::size_t width = 0;
  std::span<const double> values;
};

/// Per-frame, per-class activation tensor. Layout is frame-major, then
/// class-major, then row-major:
/// index(f, c, y, x) = ((f * C + c) * H + y) * W + x.
class HeatmapStack {
 public:
  HeatmapStack() = default;

  HeatmapStack(std::size_t frames, std::size_t classes, std::size_t height,
               std::size_t width)
      : frames_(frames), classes_(classes), height_(height), width_(width) {
    if (frames < 1 || classes < 1 || height < 1 || width < 1) {
      throw ConfigError("HeatmapStack: every dimension must be >= 1");
    }
    data_.assign(frames * classes * height * width, 0.0);
  }

  /// Builds a stack from an existing buffer, validating length and finiteness.
  static HeatmapStack from_data(std::size_t frames, std::size_t classes,
                                std::size_t height, std::size_t width,
                                std::vector<double> data) {
    HeatmapStack s(frames, classes, height, width);
    if (data.size() != s.data_.size()) {
      throw ShapeError("HeatmapStack: data length " +
                       std::to_string(data.size()) + " != F*C*H*W = " +
                       std::to_string(s.data_.size()));
    }
    for (double v : data) {
      if (!std::isfinite(v)) {
        throw FormatError("HeatmapStack: non-finite activation value");
      }
    }
    s.data_ = std::move(data);
    return s;
  }

  std::size_t frames() const { return frames_; }
  std::size_t classes() const { return classes_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  double at(std::size_t f, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[index(f, c, y, x)];
  }
  double& at(std::size_t f, std::size_t c, std::size_t y, std::size_t x) {
    return data_[index(f, c, y, x)];
  }

  MapView map_view(std::size_t frame, std::size_t cls) const {
    const std::size_t plane = height_ * width_;
    return MapView{height_, width_,
                   std::span<const double>(data_).subspan(
                       (frame * classes_ + cls) * plane, plane)};
  }

  bool same_shape(const HeatmapStack& other) const {
    return frames_ == other.frames_ && classes_ == other.classes_ &&
           height_ == other.height_ && width_ == other.width_;
  }

 private:
  std::size_t index(std::size_t f, std::size_t c, std::size_t y,
                    std::size_t x) const {
    return ((f * classes_ + c) * height_ + y) * width_ + x;
  }

  std::size_t frames_ = 0;
  std::size_t classes_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Dense row-major matrix of reals.
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  static RealMatrix zeros(std::size_t rows, std::size_t cols) {
    return RealMatrix{rows, cols, std::vector<double>(rows * cols, 0.0)};
  }

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }

  bool same_shape(const RealMatrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

/// Dense row-major matrix of {0, 1} values.
struct BinaryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> values;

  static BinaryMatrix zeros(std::size_t rows, std::size_t cols) {
    return BinaryMatrix{rows, cols,
                        std::vector<std::uint8_t>(rows * cols, 0)};
  }

  std::uint8_t at(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }
  std::uint8_t& at(std::size_t r, std::size_t c) {
    return values[r * cols + c];
  }
};

/// N x K per-sample per-class logits.
using LogitMatrix = RealMatrix;
/// N x K per-sample per-class probabilities.
using ProbMatrix = RealMatrix;
/// N x K binary ground-truth labels.
using LabelMatrix = BinaryMatrix;

}  // namespace surgpipe

/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "surgpipe/core.hpp"
#include "surgpipe/errors.hpp"
#include "surgpipe/io.hpp"

namespace surgpipe::synth {

/// Synthetic scene parameters. Blobs move in disjoint vertical lanes so
/// boxes of different classes never overlap.
struct SynthConfig {
  std::size_t frames = 200;
  std::size_t classes = 3;
  std::size_t blobs_per_frame = 3;  // at most 3
  double blob_sigma = 6.0;
  double noise_std = 0.05;
  /// Probability that a blob is left out of a frame entirely.
  double drop_rate = 0.0;
  /// Probability that a ground-truth box gets a wrong class label.
  double label_noise_rate = 0.0;
  std::size_t height = 96;
  std::size_t width = 96;
  std::uint64_t seed = 0;
};

inline void validate(const SynthConfig& cfg) {
  if (cfg.frames < 1) throw ConfigError("SynthConfig: frames must be >= 1");
  if (cfg.classes < 1) throw ConfigError("SynthConfig: classes must be >= 1");
  if (cfg.blobs_per_frame < 1 || cfg.blobs_per_frame > 3) {
    throw ConfigError("SynthConfig: blobs_per_frame must be in [1,3]");
  }
  if (!(cfg.blob_sigma > 0.0)) {
    throw ConfigError("SynthConfig: blob_sigma must be > 0");
  }
  if (!(cfg.noise_std >= 0.0)) {
    throw ConfigError("SynthConfig: noise_std must be >= 0");
  }
  if (!(cfg.drop_rate >= 0.0 && cfg.drop_rate < 1.0)) {
    throw ConfigError("SynthConfig: drop_rate must be in [0,1)");
  }
  if (!(cfg.label_noise_rate >= 0.0 && cfg.label_noise_rate < 1.0)) {
    throw ConfigError("SynthConfig: label_noise_rate must be in [0,1)");
  }
  const double margin = 2.0 * cfg.blob_sigma;
  const double lane_width = static_cast<double>(cfg.width) /
                            static_cast<double>(cfg.blobs_per_frame);
  if (lane_width <= 2.0 * margin ||
      static_cast<double>(cfg.height) <= 2.0 * margin) {
    throw ConfigError(
        "SynthConfig: dimensions too small for blob_sigma (each lane needs "
        "more than 4*sigma of room)");
  }
}

struct SynthResult {
  HeatmapStack cams;
  io::DetectionsDoc ground_truth;
};

/// Generates seeded scenes: Gaussian bumps of peak 1.0 bounce inside their
/// lanes with constant velocity; each class map holds its blobs plus
/// additive Gaussian noise clipped to [0,1]. Ground truth is the 2-sigma
/// box around each rendered blob.
inline SynthResult synth_scenes(const SynthConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  struct Blob {
    double cx, cy, vx, vy;
    double x_lo, x_hi, y_lo, y_hi;
    int class_id;
  };
  const double margin = 2.0 * cfg.blob_sigma;
  const double lane_width = static_cast<double>(cfg.width) /
                            static_cast<double>(cfg.blobs_per_frame);
  std::vector<Blob> blobs;
  for (std::size_t b = 0; b < cfg.blobs_per_frame; ++b) {
    Blob blob;
    blob.x_lo = static_cast<double>(b) * lane_width + margin;
    blob.x_hi = static_cast<double>(b + 1) * lane_width - margin;
    blob.y_lo = margin;
    blob.y_hi = static_cast<double>(cfg.height) - margin;
    blob.cx = blob.x_lo + unit(rng) * (blob.x_hi - blob.x_lo);
    blob.cy = blob.y_lo + unit(rng) * (blob.y_hi - blob.y_lo);
    blob.vx = (0.25 + unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);
    blob.vy = (0.25 + unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);
    blob.class_id = static_cast<int>(b % cfg.classes);
    blobs.push_back(blob);
  }

  SynthResult result{
      HeatmapStack(cfg.frames, cfg.classes, cfg.height, cfg.width),
      io::DetectionsDoc{io::default_class_names(cfg.classes), {}}};

  const double inv_two_sigma_sq = 1.0 / (2.0 * cfg.blob_sigma * cfg.blob_sigma);
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    FrameDetections gt_frame;
    gt_frame.frame_id = static_cast<std::int64_t>(f);

    for (Blob& blob : blobs) {
      const bool dropped = unit(rng) < cfg.drop_rate;
      const bool flip = unit(rng) < cfg.label_noise_rate && cfg.classes > 1;
      if (!dropped) {
        const auto c = static_cast<std::size_t>(blob.class_id);
        for (std::size_t y = 0; y < cfg.height; ++y) {
          const double dy = static_cast<double>(y) - blob.cy;
          for (std::size_t x = 0; x < cfg.width; ++x) {
            const double dx = static_cast<double>(x) - blob.cx;
            result.cams.at(f, c, y, x) +=
                std::exp(-(dx * dx + dy * dy) * inv_two_sigma_sq);
          }
        }
        int label = blob.class_id;
        if (flip) {
          std::uniform_int_distribution<int> other(
              0, static_cast<int>(cfg.classes) - 2);
          int pick = other(rng);
          if (pick >= blob.class_id) ++pick;
          label = pick;
        }
        gt_frame.detections.push_back(Detection{
            BoundingBox{
                std::max(0.0, blob.cx - margin),
                std::max(0.0, blob.cy - margin),
                std::min(static_cast<double>(cfg.width), blob.cx + margin),
                std::min(static_cast<double>(cfg.height), blob.cy + margin)},
            label, 1.0, false});
      }

      blob.cx += blob.vx;
      if (blob.cx > blob.x_hi) {
        blob.cx = 2.0 * blob.x_hi - blob.cx;
        blob.vx = -blob.vx;
      } else if (blob.cx < blob.x_lo) {
        blob.cx = 2.0 * blob.x_lo - blob.cx;
        blob.vx = -blob.vx;
      }
      blob.cy += blob.vy;
      if (blob.cy > blob.y_hi) {
        blob.cy = 2.0 * blob.y_hi - blob.cy;
        blob.vy = -blob.vy;
      } else if (blob.cy < blob.y_lo) {
        blob.cy = 2.0 * blob.y_lo - blob.cy;
        blob.vy = -blob.vy;
      }
    }

    if (cfg.noise_std > 0.0) {
      for (std::size_t c = 0; c < cfg.classes; ++c) {
        for (std::size_t y = 0; y < cfg.height; ++y) {
          for (std::size_t x = 0; x < cfg.width; ++x) {
            double& v = result.cams.at(f, c, y, x);
            v = std::clamp(v + noise(rng) * cfg.noise_std, 0.0, 1.0);
          }
        }
      }
    } else {
      for (std::size_t c = 0; c < cfg.classes; ++c) {
        for (std::size_t y = 0; y < cfg.height; ++y) {
          for (std::size_t x = 0; x < cfg.width; ++x) {
            double& v = result.cams.at(f, c, y, x);
            v = std::clamp(v, 0.0, 1.0);
          }
        }
      }
    }

    result.ground_truth.frames.push_back(std::move(gt_frame));
  }
  return result;
}

}  // namespace surgpipe::synth

/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "surgpipe/core.hpp"
#include "surgpipe/errors.hpp"

namespace surgpipe::track {

inline constexpr std::size_t kStateDim = 8;
inline constexpr std::size_t kObsDim = 4;
/// Velocity std assigned to freshly created tracks.
inline constexpr double kInitVelocityStd = 10.0;
/// Score decay applied per consecutive missed frame.
inline constexpr double kMissDecay = 0.9;
/// Lower bound on predicted box sizes inside the tracking loop.
inline constexpr double kMinBoxSize = 1e-3;

namespace detail {

/// Row-major R x C matrix with compile-time shape.
template <std::size_t R, std::size_t C>
struct Mat {
  std::array<double, R * C> v{};
};

template <std::size_t R, std::size_t K, std::size_t C>
inline Mat<R, C> matmul(const Mat<R, K>& a, const Mat<K, C>& b) {
  Mat<R, C> out{};
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t k = 0; k < K; ++k) {
      const double av = a.v[r * K + k];
      for (std::size_t c = 0; c < C; ++c) {
        out.v[r * C + c] += av * b.v[k * C + c];
      }
    }
  }
  return out;
}

template <std::size_t R, std::size_t C>
inline Mat<C, R> transpose(const Mat<R, C>& a) {
  Mat<C, R> out{};
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      out.v[c * R + r] = a.v[r * C + c];
    }
  }
  return out;
}

template <std::size_t N>
inline Mat<N, N> identity() {
  Mat<N, N> out{};
  for (std::size_t i = 0; i < N; ++i) out.v[i * N + i] = 1.0;
  return out;
}

template <std::size_t R, std::size_t C>
inline Mat<R, C> add(Mat<R, C> a, const Mat<R, C>& b) {
  for (std::size_t i = 0; i < R * C; ++i) a.v[i] += b.v[i];
  return a;
}

template <std::size_t R, std::size_t C>
inline Mat<R, C> sub(Mat<R, C> a, const Mat<R, C>& b) {
  for (std::size_t i = 0; i < R * C; ++i) a.v[i] -= b.v[i];
  return a;
}

/// Solves A X = B for symmetric positive definite A via Cholesky, reading
/// only A's lower triangle. Throws NumericalError when A is not PD.
template <std::size_t N, std::size_t M>
inline Mat<N, M> cholesky_solve(const Mat<N, N>& a, Mat<N, M> b) {
  Mat<N, N> l{};
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a.v[i * N + j];
      for (std::size_t k = 0; k < j; ++k) {
        sum -= l.v[i * N + k] * l.v[j * N + k];
      }
      if (i == j) {
        if (!(sum > 0.0)) {
          throw NumericalError("cholesky_solve: matrix not positive definite");
        }
        l.v[i * N + i] = std::sqrt(sum);
      } else {
        l.v[i * N + j] = sum / l.v[j * N + j];
      }
    }
  }
  // Forward substitution: L Y = B.
  for (std::size_t c = 0; c < M; ++c) {
    for (std::size_t i = 0; i < N; ++i) {
      double sum = b.v[i * M + c];
      for (std::size_t k = 0; k < i; ++k) {
        sum -= l.v[i * N + k] * b.v[k * M + c];
      }
      b.v[i * M + c] = sum / l.v[i * N + i];
    }
  }
  // Back substitution: L^T X = Y.
  for (std::size_t c = 0; c < M; ++c) {
    for (std::size_t ii = N; ii-- > 0;) {
      double sum = b.v[ii * M + c];
      for (std::size_t k = ii + 1; k < N; ++k) {
        sum -= l.v[k * N + ii] * b.v[k * M + c];
      }
      b.v[ii * M + c] = sum / l.v[ii * N + ii];
    }
  }
  return b;
}

inline Mat<kStateDim, kStateDim> transition_matrix() {
  Mat<kStateDim, kStateDim> f = identity<kStateDim>();
  for (std::size_t i = 0; i < kObsDim; ++i) {
    f.v[i * kStateDim + (i + kObsDim)] = 1.0;
  }
  return f;
}

inline Mat<kObsDim, kStateDim> observation_matrix() {
  Mat<kObsDim, kStateDim> h{};
  for (std::size_t i = 0; i < kObsDim; ++i) h.v[i * kStateDim + i] = 1.0;
  return h;
}

}  // namespace detail

/// Constant-velocity track over (cx, cy, w, h) and their per-frame
/// velocities.
struct TrackState {
  std::array<double, kStateDim> mean{};
  /// Row-major 8x8 covariance, symmetric positive semi-definite.
  std::array<double, kStateDim * kStateDim> covariance{};
  int class_id = 0;
  std::int64_t age = 0;
  int misses = 0;
  std::int64_t track_id = 0;
  /// Score of the last matched detection; decayed while coasting.
  double score = 0.0;
};

struct FuseConfig {
  /// Detection weight in box fusion; 1 means trust detections fully.
  double det_weight = 0.7;
  double match_iou = 0.3;
  /// Tracks whose consecutive miss count exceeds this are dropped.
  int max_misses = 5;
  double process_noise_position = 1.0;
  double process_noise_size = 0.5;
  double process_noise_velocity = 0.1;
  double measurement_noise = 1.0;
};

inline void validate(const FuseConfig& cfg) {
  if (!(cfg.det_weight >= 0.0 && cfg.det_weight <= 1.0)) {
    throw ConfigError("FuseConfig: det_weight must be in [0,1]");
  }
  if (!(cfg.match_iou >= 0.0 && cfg.match_iou <= 1.0)) {
    throw ConfigError("FuseConfig: match_iou must be in [0,1]");
  }
  if (cfg.max_misses < 0) {
    throw ConfigError("FuseConfig: max_misses must be >= 0");
  }
  if (!(cfg.process_noise_position >= 0.0) ||
      !(cfg.process_noise_size >= 0.0) ||
      !(cfg.process_noise_velocity >= 0.0) ||
      !(cfg.measurement_noise >= 0.0)) {
    throw ConfigError("FuseConfig: noise stds must be >= 0");
  }
}

/// Box described by the state mean's first four components.
inline BoundingBox state_box(const TrackState& state) {
  const double cx = state.mean[0];
  const double cy = state.mean[1];
  const double w = state.mean[2];
  const double h = state.mean[3];
  return BoundingBox{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
}

/// Fresh track centered on a detection, with zero velocity.
inline TrackState make_track(const Detection& det, const FuseConfig& cfg,
                             std::int64_t track_id) {
  TrackState state;
  state.mean[0] = det.box.center_x();
  state.mean[1] = det.box.center_y();
  state.mean[2] = det.box.width();
  state.mean[3] = det.box.height();
  const double obs_var = cfg.measurement_noise > 0.0
                             ? cfg.measurement_noise * cfg.measurement_noise
                             : 1.0;
  const double vel_var = kInitVelocityStd * kInitVelocityStd;
  for (std::size_t i = 0; i < kObsDim; ++i) {
    state.covariance[i * kStateDim + i] = obs_var;
    const std::size_t v = i + kObsDim;
    state.covariance[v * kStateDim + v] = vel_var;
  }
  state.class_id = det.class_id;
  state.track_id = track_id;
  state.score = det.score;
  return state;
}

/// Advances the state one frame: mean by velocity, covariance by
/// F P F^T + Q, age by one.
inline TrackState kalman_predict(const TrackState& state,
                                 const FuseConfig& cfg) {
  using namespace detail;
  const Mat<kStateDim, kStateDim> f = transition_matrix();

  TrackState out = state;
  Mat<kStateDim, 1> mean;
  mean.v = state.mean;
  const Mat<kStateDim, 1> advanced = matmul(f, mean);
  out.mean = advanced.v;

  Mat<kStateDim, kStateDim> q{};
  const double p2 = cfg.process_noise_position * cfg.process_noise_position;
  const double s2 = cfg.process_noise_size * cfg.process_noise_size;
  const double v2 = cfg.process_noise_velocity * cfg.process_noise_velocity;
  q.v[0 * kStateDim + 0] = p2;
  q.v[1 * kStateDim + 1] = p2;
  q.v[2 * kStateDim + 2] = s2;
  q.v[3 * kStateDim + 3] = s2;
  for (std::size_t i = kObsDim; i < kStateDim; ++i) {
    q.v[i * kStateDim + i] = v2;
  }
  Mat<kStateDim, kStateDim> p;
  p.v = state.covariance;
  out.covariance = add(matmul(matmul(f, p), transpose(f)), q).v;
  out.age = state.age + 1;
  return out;
}

/// Standard Kalman update against a (cx, cy, w, h) observation of the box;
/// resets the miss counter.
inline TrackState kalman_update(const TrackState& state,
                                const BoundingBox& measurement,
                                const FuseConfig& cfg) {
  using namespace detail;
  const Mat<kObsDim, kStateDim> h = observation_matrix();
  const Mat<kStateDim, kObsDim> ht = transpose(h);

  Mat<kObsDim, 1> z;
  z.v[0] = measurement.center_x();
  z.v[1] = measurement.center_y();
  z.v[2] = measurement.width();
  z.v[3] = measurement.height();

  Mat<kStateDim, 1> x;
  x.v = state.mean;
  Mat<kStateDim, kStateDim> p;
  p.v = state.covariance;
  const Mat<kObsDim, 1> innovation = sub(z, matmul(h, x));

  const Mat<kStateDim, kObsDim> pht = matmul(p, ht);
  Mat<kObsDim, kObsDim> s = matmul(h, pht);
  const double r2 = cfg.measurement_noise * cfg.measurement_noise;
  for (std::size_t i = 0; i < kObsDim; ++i) s.v[i * kObsDim + i] += r2;

  // K = P H^T S^{-1}, computed as K^T = S^{-1} (P H^T)^T.
  const Mat<kObsDim, kStateDim> kt = cholesky_solve(s, transpose(pht));
  const Mat<kStateDim, kObsDim> gain = transpose(kt);

  TrackState out = state;
  out.mean = add(x, matmul(gain, innovation)).v;

  const Mat<kStateDim, kStateDim> ikh =
      sub(identity<kStateDim>(), matmul(gain, h));
  out.covariance = matmul(ikh, p).v;
  out.misses = 0;
  return out;
}

struct Association {
  /// (track index, detection index) pairs.
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

/// Greedy same-class matching by descending IoU; pairs below match_iou are
/// never matched. Ties break toward lower track, then detection, index.
inline Association associate(std::span<const TrackState> tracks,
                             const FrameDetections& dets, double match_iou) {
  struct Pair {
    double overlap;
    std::size_t track;
    std::size_t det;
  };
  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    const BoundingBox tb = state_box(tracks[t]);
    for (std::size_t d = 0; d < dets.detections.size(); ++d) {
      if (dets.detections[d].class_id != tracks[t].class_id) continue;
      const double overlap = iou(tb, dets.detections[d].box);
      if (overlap >= match_iou) pairs.push_back({overlap, t, d});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.track != b.track) return a.track < b.track;
    return a.det < b.det;
  });

  Association out;
  std::vector<std::uint8_t> track_used(tracks.size(), 0);
  std::vector<std::uint8_t> det_used(dets.detections.size(), 0);
  for (const Pair& p : pairs) {
    if (track_used[p.track] || det_used[p.det]) continue;
    track_used[p.track] = 1;
    det_used[p.det] = 1;
    out.matches.emplace_back(p.track, p.det);
  }
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    if (!track_used[t]) out.unmatched_tracks.push_back(t);
  }
  for (std::size_t d = 0; d < dets.detections.size(); ++d) {
    if (!det_used[d]) out.unmatched_detections.push_back(d);
  }
  return out;
}

/// Blends detection and track boxes in (cx, cy, w, h) space:
/// each component = w * det + (1 - w) * track.
inline BoundingBox fuse_box(const BoundingBox& det,
                            const BoundingBox& track_pred, double w) {
  if (!(w >= 0.0 && w <= 1.0)) {
    throw ConfigError("fuse_box: weight must be in [0,1]");
  }
  const double cx = w * det.center_x() + (1.0 - w) * track_pred.center_x();
  const double cy = w * det.center_y() + (1.0 - w) * track_pred.center_y();
  const double bw = w * det.width() + (1.0 - w) * track_pred.width();
  const double bh = w * det.height() + (1.0 - w) * track_pred.height();
  return BoundingBox{cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0,
                     cy + bh / 2.0};
}

/// Runs the predict/associate/update/fuse loop over an ordered sequence.
/// Matched detections are emitted as fused boxes; unmatched detections seed
/// new tracks and pass through; coasting tracks emit predicted boxes with
/// decayed scores and from_track set until max_misses is exceeded.
inline std::vector<FrameDetections> track_sequence(
    std::span<const FrameDetections> frames, const FuseConfig& cfg = {}) {
  validate(cfg);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame_id <= frames[i - 1].frame_id) {
      throw OrderError("track_sequence: frame_ids must be strictly increasing");
    }
  }

  std::vector<FrameDetections> output;
  output.reserve(frames.size());
  std::vector<TrackState> tracks;
  std::int64_t next_track_id = 0;

  for (const FrameDetections& frame : frames) {
    std::vector<TrackState> predicted;
    predicted.reserve(tracks.size());
    for (const TrackState& t : tracks) {
      TrackState p = kalman_predict(t, cfg);
      p.mean[2] = std::max(p.mean[2], kMinBoxSize);
      p.mean[3] = std::max(p.mean[3], kMinBoxSize);
      predicted.push_back(p);
    }

    const Association assoc = associate(predicted, frame, cfg.match_iou);

    FrameDetections out_frame;
    out_frame.frame_id = frame.frame_id;
    std::vector<TrackState> survivors;
    survivors.reserve(predicted.size() + assoc.unmatched_detections.size());

    std::vector<std::int64_t> matched_det_for_track(predicted.size(), -1);
    for (const auto& [t, d] : assoc.matches) {
      matched_det_for_track[t] = static_cast<std::int64_t>(d);
    }

    // Detections first, in input order: matched ones fused, the rest as-is.
    std::vector<std::uint8_t> det_matched(frame.detections.size(), 0);
    for (const auto& [t, d] : assoc.matches) det_matched[d] = 1;
    for (std::size_t d = 0; d < frame.detections.size(); ++d) {
      const Detection& det = frame.detections[d];
      if (!det_matched[d]) {
        out_frame.detections.push_back(det);
        continue;
      }
      std::size_t t = 0;
      for (const auto& [ti, di] : assoc.matches) {
        if (di == d) {
          t = ti;
          break;
        }
      }
      const BoundingBox fused =
          fuse_box(det.box, state_box(predicted[t]), cfg.det_weight);
      if (is_valid(fused)) {
        out_frame.detections.push_back(
            Detection{fused, det.class_id, det.score, false});
      } else {
        out_frame.detections.push_back(det);
      }
    }

    // Coasting tracks after the detections, in track order.
    for (std::size_t t = 0; t < predicted.size(); ++t) {
      if (matched_det_for_track[t] >= 0) {
        const auto d = static_cast<std::size_t>(matched_det_for_track[t]);
        TrackState updated =
            kalman_update(predicted[t], frame.detections[d].box, cfg);
        updated.score = frame.detections[d].score;
        survivors.push_back(std::move(updated));
        continue;
      }
      TrackState coasting = predicted[t];
      coasting.misses += 1;
      if (coasting.misses > cfg.max_misses) continue;
      BoundingBox box = state_box(coasting);
      box.x_min = std::max(box.x_min, 0.0);
      box.y_min = std::max(box.y_min, 0.0);
      if (is_valid(box) && box.x_max > box.x_min && box.y_max > box.y_min) {
        const double decayed =
            coasting.score * std::pow(kMissDecay, coasting.misses);
        out_frame.detections.push_back(
            Detection{box, coasting.class_id, decayed, true});
      }
      survivors.push_back(std::move(coasting));
    }

    for (std::size_t d : assoc.unmatched_detections) {
      survivors.push_back(
          make_track(frame.detections[d], cfg, next_track_id++));
    }

    tracks = std::move(survivors);
    output.push_back(std::move(out_frame));
  }
  return output;
}

struct PseudoLabelSplit {
  FrameDetections accepted;
  FrameDetections rejected;
};

/// Keeps candidates whose best IoU against same-class reference boxes is at
/// least iou_min; candidates strictly below (or with no same-class
/// reference) are rejected.
inline PseudoLabelSplit filter_pseudo_labels(const FrameDetections& candidates,
                                             const FrameDetections& references,
                                             double iou_min = 0.2) {
  if (!(iou_min >= 0.0 && iou_min <= 1.0)) {
    throw ConfigError("filter_pseudo_labels: iou_min must be in [0,1]");
  }
  PseudoLabelSplit split;
  split.accepted.frame_id = candidates.frame_id;
  split.rejected.frame_id = candidates.frame_id;
  for (const Detection& cand : candidates.detections) {
    double best = 0.0;
    for (const Detection& ref : references.detections) {
      if (ref.class_id != cand.class_id) continue;
      best = std::max(best, iou(cand.box, ref.box));
    }
    if (best >= iou_min) {
      split.accepted.detections.push_back(cand);
    } else {
      split.rejected.detections.push_back(cand);
    }
  }
  return split;
}

/// Keeps detections with score >= score_min.
inline FrameDetections filter_by_score(const FrameDetections& dets,
                                       double score_min = 0.7) {
  if (!(score_min >= 0.0 && score_min <= 1.0)) {
    throw ConfigError("filter_by_score: score_min must be in [0,1]");
  }
  FrameDetections out;
  out.frame_id = dets.frame_id;
  for (const Detection& d : dets.detections) {
    if (d.score >= score_min) out.detections.push_back(d);
  }
  return out;
}

struct BootstrapResult {
  FrameDetections accepted;
  FrameDetections rejected;
  /// Accepted counts keyed by class id.
  std::map<int, std::size_t> accepted_per_class;
};

/// One pseudo-label round: score gate, then IoU gate against references.
inline BootstrapResult bootstrap_round(const FrameDetections& detections,
                                       const FrameDetections& references,
                                       double iou_min = 0.2,
                                       double score_min = 0.7) {
  BootstrapResult result;
  const FrameDetections scored = filter_by_score(detections, score_min);
  PseudoLabelSplit split = filter_pseudo_labels(scored, references, iou_min);
  result.accepted = std::move(split.accepted);
  result.rejected = std::move(split.rejected);
  for (const Detection& d : detections.detections) {
    if (d.score < score_min) result.rejected.detections.push_back(d);
  }
  for (const Detection& d : result.accepted.detections) {
    result.accepted_per_class[d.class_id] += 1;
  }
  return result;
}

}  // namespace surgpipe::track

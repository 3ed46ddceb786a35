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

#include "surgpipe/core.hpp"
#include "surgpipe/errors.hpp"

namespace surgpipe::calib {

/// Asymmetric focal loss hyperparameters.
struct AslParams {
  double gamma_plus = 1.0;
  double gamma_minus = 4.0;
  /// Probability margin; negatives with p <= margin contribute zero loss.
  double margin = 0.05;

  /// Simplified parameterization: plain asymmetric BCE, no margin.
  static AslParams simplified() { return AslParams{0.0, 1.0, 0.0}; }
};

inline void validate(const AslParams& params) {
  if (!(params.gamma_plus >= 0.0) || !(params.gamma_minus >= 0.0)) {
    throw ConfigError("AslParams: gammas must be >= 0");
  }
  if (!(params.margin >= 0.0 && params.margin < 1.0)) {
    throw ConfigError("AslParams: margin must be in [0,1)");
  }
}

/// Per-class additive logit shifts.
struct CalibrationTable {
  std::vector<double> shifts;

  std::size_t classes() const { return shifts.size(); }
};

/// Probability clamp applied before logarithms.
inline constexpr double kProbEpsilon = 1e-7;

/// out_k = 1 iff probs_k > t (strict).
inline std::vector<std::uint8_t> cast_presence(std::span<const double> probs,
                                               double t = 0.5) {
  std::vector<std::uint8_t> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = probs[i] > t ? 1 : 0;
  }
  return out;
}

/// 2tp / (2tp + fp + fn); 1.0 when all three counts are zero.
inline double f1_binary(std::span<const std::uint8_t> pred,
                        std::span<const std::uint8_t> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("f1_binary: length mismatch");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++tp;
    if (p && !t) ++fp;
    if (!p && t) ++fn;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

struct CalibrationFit {
  CalibrationTable table;
  /// Classes with no positive labels (shift left at 0).
  std::vector<std::string> warnings;
};

namespace detail {

/// Best F1 threshold for one class. Candidates are the midpoints between
/// consecutive sorted distinct probabilities plus one surrogate beyond each
/// end; the surrogates induce the same predictions as thresholds 0 and 1
/// while keeping logit(t) finite. Ties prefer the highest threshold.
inline double best_f1_threshold(std::span<const double> probs,
                                std::span<const std::uint8_t> labels) {
  struct Entry {
    double prob;
    std::uint8_t label;
  };
  std::vector<Entry> entries(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    entries[i] = {probs[i], labels[i]};
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.prob > b.prob; });

  std::size_t total_pos = 0;
  for (const Entry& e : entries) total_pos += e.label;

  const double max_p = entries.front().prob;
  const double min_p = entries.back().prob;

  // Threshold above every probability: nothing predicted positive.
  double best_t = (max_p + 1.0) / 2.0;
  double best_f1 =
      total_pos == 0 ? 1.0 : 0.0;  // tp=fp=0, fn=total_pos

  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < entries.size()) {
    const double v = entries[i].prob;
    while (i < entries.size() && entries[i].prob == v) {
      if (entries[i].label) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    const double t =
        i < entries.size() ? (v + entries[i].prob) / 2.0 : min_p / 2.0;
    const std::size_t fn = total_pos - tp;
    const std::size_t denom = 2 * tp + fp + fn;
    const double f1 =
        denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) /
                               static_cast<double>(denom);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace detail

/// Fits per-class shifts so a fixed 0.5 cast attains each class's maximum
/// F1. Classes without positives keep shift 0 and emit a warning.
inline CalibrationFit fit_logit_shift(const LogitMatrix& logits,
                                      const LabelMatrix& labels) {
  if (logits.rows != labels.rows || logits.cols != labels.cols) {
    throw ShapeError("fit_logit_shift: logits/labels shape mismatch");
  }
  if (logits.rows == 0 || logits.cols == 0) {
    throw EmptyInputError("fit_logit_shift: empty input");
  }

  CalibrationFit fit;
  fit.table.shifts.assign(logits.cols, 0.0);

  std::vector<double> probs(logits.rows);
  std::vector<std::uint8_t> truth(logits.rows);
  for (std::size_t c = 0; c < logits.cols; ++c) {
    std::size_t positives = 0;
    for (std::size_t n = 0; n < logits.rows; ++n) {
      probs[n] = sigmoid(logits.at(n, c));
      truth[n] = labels.at(n, c);
      positives += truth[n];
    }
    if (positives == 0) {
      fit.warnings.push_back("class " + std::to_string(c) +
                             ": no positive labels, shift kept at 0");
      continue;
    }
    double t = detail::best_f1_threshold(probs, truth);
    t = std::clamp(t, kProbEpsilon, 1.0 - kProbEpsilon);
    fit.table.shifts[c] = -std::log(t / (1.0 - t));
  }
  return fit;
}

/// p_{n,c} = sigmoid(logit_{n,c} + shift_c).
inline ProbMatrix apply_calibration(const LogitMatrix& logits,
                                    const CalibrationTable& table) {
  if (table.classes() != logits.cols) {
    throw ShapeError("apply_calibration: class count mismatch");
  }
  ProbMatrix probs = ProbMatrix::zeros(logits.rows, logits.cols);
  for (std::size_t n = 0; n < logits.rows; ++n) {
    for (std::size_t c = 0; c < logits.cols; ++c) {
      probs.at(n, c) = sigmoid(logits.at(n, c) + table.shifts[c]);
    }
  }
  return probs;
}

/// Elementwise mean of equally shaped probability matrices.
inline ProbMatrix ensemble_mean(std::span<const ProbMatrix> matrices) {
  if (matrices.empty()) throw EmptyInputError("ensemble_mean: no matrices");
  const ProbMatrix& first = matrices.front();
  for (const ProbMatrix& m : matrices) {
    if (!m.same_shape(first)) {
      throw ShapeError("ensemble_mean: shape mismatch");
    }
  }
  ProbMatrix out = ProbMatrix::zeros(first.rows, first.cols);
  const double inv = 1.0 / static_cast<double>(matrices.size());
  for (const ProbMatrix& m : matrices) {
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      out.values[i] += m.values[i];
    }
  }
  for (double& v : out.values) v *= inv;
  return out;
}

struct AslResult {
  double total = 0.0;
  RealMatrix per_element;
};

namespace detail {

inline double clamp_prob(double p) {
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

inline double asl_element(double p, bool positive, const AslParams& params) {
  p = clamp_prob(p);
  if (positive) {
    return -std::pow(1.0 - p, params.gamma_plus) * std::log(p);
  }
  const double pm = p - params.margin;
  if (pm <= 0.0) return 0.0;
  return -std::pow(pm, params.gamma_minus) * std::log(1.0 - pm);
}

inline double asl_element_grad(double p, bool positive,
                               const AslParams& params) {
  p = clamp_prob(p);
  if (positive) {
    const double q = 1.0 - p;
    double grad = -std::pow(q, params.gamma_plus) / p;
    if (params.gamma_plus != 0.0) {
      grad += params.gamma_plus * std::pow(q, params.gamma_plus - 1.0) *
              std::log(p);
    }
    return grad;
  }
  const double pm = p - params.margin;
  if (pm <= 0.0) return 0.0;  // subgradient 0 at the kink
  double grad = std::pow(pm, params.gamma_minus) / (1.0 - pm);
  if (params.gamma_minus != 0.0) {
    grad -= params.gamma_minus * std::pow(pm, params.gamma_minus - 1.0) *
            std::log(1.0 - pm);
  }
  return grad;
}

}  // namespace detail

/// Asymmetric focal loss. Per element:
///   y=1:  -(1-p)^{g+} * ln(p)
///   y=0:  -(p_m)^{g-} * ln(1-p_m),  p_m = max(p - margin, 0)
/// with p clamped to [eps, 1-eps] first. Total is the sum over elements.
inline AslResult asl_loss(const ProbMatrix& probs, const LabelMatrix& labels,
                          const AslParams& params = {}) {
  validate(params);
  if (labels.rows != probs.rows || labels.cols != probs.cols) {
    throw ShapeError("asl_loss: probs/labels shape mismatch");
  }
  AslResult result;
  result.per_element = RealMatrix::zeros(probs.rows, probs.cols);
  for (std::size_t i = 0; i < probs.values.size(); ++i) {
    const double loss =
        detail::asl_element(probs.values[i], labels.values[i] != 0, params);
    result.per_element.values[i] = loss;
    result.total += loss;
  }
  return result;
}

/// dLoss/dp per element, using subgradient 0 at the p = margin kink.
inline RealMatrix asl_gradient(const ProbMatrix& probs,
                               const LabelMatrix& labels,
                               const AslParams& params = {}) {
  validate(params);
  if (labels.rows != probs.rows || labels.cols != probs.cols) {
    throw ShapeError("asl_gradient: probs/labels shape mismatch");
  }
  RealMatrix grad = RealMatrix::zeros(probs.rows, probs.cols);
  for (std::size_t i = 0; i < probs.values.size(); ++i) {
    grad.values[i] = detail::asl_element_grad(probs.values[i],
                                              labels.values[i] != 0, params);
  }
  return grad;
}

/// w_c = median(frequencies) / frequency_c.
inline std::vector<double> median_freq_weights(
    std::span<const double> frequencies) {
  if (frequencies.empty()) {
    throw EmptyInputError("median_freq_weights: empty input");
  }
  for (double f : frequencies) {
    if (!(f > 0.0)) {
      throw DegenerateClassError(
          "median_freq_weights: class frequency must be > 0");
    }
  }
  std::vector<double> sorted(frequencies.begin(), frequencies.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1
                            ? sorted[n / 2]
                            : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<double> weights(n);
  for (std::size_t c = 0; c < n; ++c) weights[c] = median / frequencies[c];
  return weights;
}

}  // namespace surgpipe::calib

/*!
 * Copyright (c) 2026 the surgpipe authors. All rights reserved.
 * Licensed under the Apache License 2.0. See LICENSE in the project root.
 */

// Command-line front end. Subcommands cover the full post-model pipeline:
// synth -> localize -> track -> pseudo-label -> eval, plus calibrate and
// classify for the presence branch. Exit codes: 0 success, 2 input or
// format error, 3 evaluation-domain error (empty ground truth).

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "surgpipe/surgpipe.hpp"

namespace {

using surgpipe::FrameDetections;
using surgpipe::io::DetectionsDoc;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitEvalDomainError = 3;

struct SynthArgs {
  std::string out;
  std::string gt_out;
  surgpipe::synth::SynthConfig cfg;
};

struct LocalizeArgs {
  std::string cams;
  std::string out;
  std::string method = "otsu";
  surgpipe::cam2box::LocalizeConfig cfg;
};

struct CalibrateArgs {
  std::string logits;
  std::string labels;
  std::string shifts;
};

struct ClassifyArgs {
  std::vector<std::string> logits;
  std::string shifts;
  std::string out;
};

struct TrackArgs {
  std::string dets;
  std::string out;
  surgpipe::track::FuseConfig cfg;
};

struct PseudoArgs {
  std::string dets;
  std::string refs;
  std::string out;
  double iou_min = 0.2;
  double score_min = 0.7;
};

struct EvalArgs {
  std::string dets;
  std::string gt;
  std::string out;
  double iou = 0.5;
  bool ignore_track_boxes = false;
};

int run_synth(const SynthArgs& args) {
  const surgpipe::synth::SynthResult result =
      surgpipe::synth::synth_scenes(args.cfg);
  surgpipe::io::write_camt(args.out, result.cams);
  surgpipe::io::write_detections(args.gt_out, result.ground_truth);
  return kExitOk;
}

int run_localize(const LocalizeArgs& args) {
  surgpipe::cam2box::LocalizeConfig cfg = args.cfg;
  cfg.threshold_mode = args.method == "fixed"
                           ? surgpipe::cam2box::ThresholdMode::kFixed
                           : surgpipe::cam2box::ThresholdMode::kOtsu;
  const surgpipe::HeatmapStack stack = surgpipe::io::read_camt(args.cams);

  DetectionsDoc doc;
  doc.classes = surgpipe::io::default_class_names(stack.classes());
  for (std::size_t f = 0; f < stack.frames(); ++f) {
    surgpipe::cam2box::LocalizeResult res =
        surgpipe::cam2box::localize_frame(stack, f, cfg);
    for (const std::string& w : res.warnings) {
      std::fprintf(stderr, "localize: frame %zu: %s\n", f, w.c_str());
    }
    doc.frames.push_back(std::move(res.frame));
  }
  surgpipe::io::write_detections(args.out, doc);
  return kExitOk;
}

int run_calibrate(const CalibrateArgs& args) {
  const surgpipe::LogitMatrix logits =
      surgpipe::io::read_real_csv(args.logits);
  const surgpipe::LabelMatrix labels =
      surgpipe::io::read_binary_csv(args.labels);
  const surgpipe::calib::CalibrationFit fit =
      surgpipe::calib::fit_logit_shift(logits, labels);
  for (const std::string& w : fit.warnings) {
    std::fprintf(stderr, "calibrate: %s\n", w.c_str());
  }
  surgpipe::RealMatrix row{1, fit.table.classes(), fit.table.shifts};
  surgpipe::io::write_real_csv(args.shifts, row);
  return kExitOk;
}

int run_classify(const ClassifyArgs& args) {
  std::vector<surgpipe::ProbMatrix> members;
  surgpipe::calib::CalibrationTable table;
  for (const std::string& path : args.logits) {
    const surgpipe::LogitMatrix logits = surgpipe::io::read_real_csv(path);
    if (table.shifts.empty()) {
      if (args.shifts.empty()) {
        table.shifts.assign(logits.cols, 0.0);
      } else {
        const surgpipe::RealMatrix row =
            surgpipe::io::read_real_csv(args.shifts);
        if (row.rows != 1) {
          throw surgpipe::FormatError(
              "classify: shifts file must have exactly one row");
        }
        table.shifts = row.values;
      }
    }
    members.push_back(surgpipe::calib::apply_calibration(logits, table));
  }
  const surgpipe::ProbMatrix mean = surgpipe::calib::ensemble_mean(members);

  surgpipe::LabelMatrix out =
      surgpipe::LabelMatrix::zeros(mean.rows, mean.cols);
  for (std::size_t r = 0; r < mean.rows; ++r) {
    for (std::size_t c = 0; c < mean.cols; ++c) {
      out.at(r, c) = mean.at(r, c) > 0.5 ? 1 : 0;
    }
  }
  surgpipe::io::write_binary_csv(args.out, out);
  return kExitOk;
}

/// Missing frame_ids are gaps the tracker should coast through, so empty
/// frames are inserted between the minimum and maximum ids.
std::vector<FrameDetections> fill_frame_gaps(
    const std::vector<FrameDetections>& frames) {
  if (frames.empty()) return {};
  std::vector<FrameDetections> filled;
  std::int64_t next_id = frames.front().frame_id;
  for (const FrameDetections& f : frames) {
    while (next_id < f.frame_id) {
      filled.push_back(FrameDetections{next_id, {}});
      ++next_id;
    }
    filled.push_back(f);
    next_id = f.frame_id + 1;
  }
  return filled;
}

int run_track(const TrackArgs& args) {
  const DetectionsDoc doc = surgpipe::io::read_detections(args.dets);
  const std::vector<FrameDetections> frames = fill_frame_gaps(doc.frames);

  DetectionsDoc out;
  out.classes = doc.classes;
  out.frames = surgpipe::track::track_sequence(frames, args.cfg);
  surgpipe::io::write_detections(args.out, out);
  return kExitOk;
}

int run_pseudo(const PseudoArgs& args) {
  const DetectionsDoc dets = surgpipe::io::read_detections(args.dets);
  const DetectionsDoc refs = surgpipe::io::read_detections(args.refs);

  std::map<std::int64_t, const FrameDetections*> refs_by_id;
  for (const FrameDetections& f : refs.frames) refs_by_id[f.frame_id] = &f;

  DetectionsDoc out;
  out.classes = dets.classes;
  std::map<int, std::size_t> accepted_per_class;
  std::size_t total = 0;
  std::size_t accepted = 0;
  for (const FrameDetections& frame : dets.frames) {
    FrameDetections empty;
    empty.frame_id = frame.frame_id;
    const auto it = refs_by_id.find(frame.frame_id);
    const FrameDetections& ref = it == refs_by_id.end() ? empty : *it->second;
    surgpipe::track::BootstrapResult round = surgpipe::track::bootstrap_round(
        frame, ref, args.iou_min, args.score_min);
    total += frame.detections.size();
    accepted += round.accepted.detections.size();
    for (const auto& [cls, n] : round.accepted_per_class) {
      accepted_per_class[cls] += n;
    }
    out.frames.push_back(std::move(round.accepted));
  }
  surgpipe::io::write_detections(args.out, out);

  std::printf("accepted %zu of %zu candidates\n", accepted, total);
  for (const auto& [cls, n] : accepted_per_class) {
    const std::string name =
        static_cast<std::size_t>(cls) < dets.classes.size()
            ? dets.classes[static_cast<std::size_t>(cls)]
            : "class_" + std::to_string(cls);
    std::printf("  %s: %zu\n", name.c_str(), n);
  }
  return kExitOk;
}

int run_eval(const EvalArgs& args) {
  const DetectionsDoc pred = surgpipe::io::read_detections(args.dets);
  const DetectionsDoc gt = surgpipe::io::read_detections(args.gt);

  surgpipe::metrics::EvalConfig cfg;
  cfg.iou_match = args.iou;
  cfg.include_track_boxes = !args.ignore_track_boxes;
  const surgpipe::metrics::EvalReport report =
      surgpipe::metrics::mean_ap(pred.frames, gt.frames, cfg);

  const auto class_name = [&](std::size_t c) -> std::string {
    if (c < gt.classes.size()) return gt.classes[c];
    if (c < pred.classes.size()) return pred.classes[c];
    return "class_" + std::to_string(c);
  };

  std::printf("%-20s %8s %8s %6s %6s %6s\n", "class", "AP", "F1", "TP", "FP",
              "FN");
  for (std::size_t c = 0; c < report.per_class_ap.size(); ++c) {
    const std::string ap = report.ap_defined[c]
                               ? std::to_string(report.per_class_ap[c])
                               : std::string("-");
    const std::string f1 = report.f1_defined[c]
                               ? std::to_string(report.per_class_f1[c])
                               : std::string("-");
    std::printf("%-20s %8.8s %8.8s %6zu %6zu %6zu\n", class_name(c).c_str(),
                ap.c_str(), f1.c_str(), report.tp[c], report.fp[c],
                report.fn[c]);
  }
  std::printf("mean_ap %.6f  macro_f1 %.6f\n", report.mean_ap,
              report.mean_f1);

  nlohmann::ordered_json doc;
  doc["mean_ap"] = report.mean_ap;
  doc["macro_f1"] = report.mean_f1;
  doc["iou_match"] = args.iou;
  doc["classes"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < report.per_class_ap.size(); ++c) {
    nlohmann::ordered_json entry;
    entry["name"] = class_name(c);
    entry["ap"] = report.ap_defined[c]
                      ? nlohmann::ordered_json(report.per_class_ap[c])
                      : nlohmann::ordered_json(nullptr);
    entry["f1"] = report.f1_defined[c]
                      ? nlohmann::ordered_json(report.per_class_f1[c])
                      : nlohmann::ordered_json(nullptr);
    entry["tp"] = report.tp[c];
    entry["fp"] = report.fp[c];
    entry["fn"] = report.fn[c];
    doc["classes"].push_back(std::move(entry));
  }
  std::printf("%s\n", doc.dump().c_str());
  if (!args.out.empty()) {
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) {
      throw surgpipe::FormatError("cannot open report file: " + args.out);
    }
    out << doc.dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post-model pipeline toolkit: activation maps to boxes, "
               "calibration, tracking, pseudo-labels, and evaluation"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic activation-map scene with ground truth");
  synth->add_option("--out", synth_args.out, "Output CAMT tensor path")
      ->required();
  synth->add_option("--gt-out", synth_args.gt_out,
                    "Output ground-truth detections path")
      ->required();
  synth->add_option("--frames", synth_args.cfg.frames, "Frame count");
  synth->add_option("--classes", synth_args.cfg.classes, "Class count");
  synth->add_option("--blobs", synth_args.cfg.blobs_per_frame,
                    "Blobs per frame (1-3)");
  synth->add_option("--blob-sigma", synth_args.cfg.blob_sigma,
                    "Gaussian blob sigma in pixels");
  synth->add_option("--noise-std", synth_args.cfg.noise_std,
                    "Additive noise standard deviation");
  synth->add_option("--drop-rate", synth_args.cfg.drop_rate,
                    "Per-frame probability of omitting a blob");
  synth->add_option("--label-noise", synth_args.cfg.label_noise_rate,
                    "Probability of a wrong ground-truth class");
  synth->add_option("--height", synth_args.cfg.height, "Map height");
  synth->add_option("--width", synth_args.cfg.width, "Map width");
  synth->add_option("--seed", synth_args.cfg.seed, "Random seed");

  LocalizeArgs localize_args;
  auto* localize = app.add_subcommand(
      "localize", "Convert activation maps into scored bounding boxes");
  localize->add_option("--cams", localize_args.cams, "Input CAMT tensor path")
      ->required();
  localize->add_option("--out", localize_args.out, "Output detections path")
      ->required();
  localize
      ->add_option("--method", localize_args.method,
                   "Threshold method: otsu or fixed")
      ->check(CLI::IsMember({"otsu", "fixed"}));
  localize->add_option("--sigma", localize_args.cfg.fixed_sigma,
                       "Fixed threshold on the normalized map");
  localize->add_option("--presence-thresh",
                       localize_args.cfg.presence_threshold,
                       "Presence probability gate");
  localize->add_option("--min-area", localize_args.cfg.min_component_area,
                       "Minimum component area in pixels");
  localize->add_option("--dedup-iou", localize_args.cfg.dedup_iou,
                       "Duplicate suppression IoU");
  localize->add_option("--bins", localize_args.cfg.histogram_bins,
                       "Histogram bins for the otsu method");
  localize->add_option("--connectivity", localize_args.cfg.connectivity,
                       "Pixel connectivity: 4 or 8");

  CalibrateArgs calibrate_args;
  auto* calibrate = app.add_subcommand(
      "calibrate", "Fit per-class logit shifts that maximize F1 at 0.5");
  calibrate
      ->add_option("--logits", calibrate_args.logits, "Input logits table")
      ->required();
  calibrate
      ->add_option("--labels", calibrate_args.labels, "Input labels table")
      ->required();
  calibrate
      ->add_option("--shifts", calibrate_args.shifts, "Output shifts table")
      ->required();

  ClassifyArgs classify_args;
  auto* classify = app.add_subcommand(
      "classify", "Cast presence labels from (ensembled) logit tables");
  classify
      ->add_option("--logits", classify_args.logits,
                   "Input logits table (repeat to ensemble)")
      ->required();
  classify->add_option("--shifts", classify_args.shifts,
                       "Shifts table from calibrate (default: all zero)");
  classify->add_option("--out", classify_args.out, "Output labels table")
      ->required();

  TrackArgs track_args;
  auto* track = app.add_subcommand(
      "track", "Smooth a detection sequence with a constant-velocity tracker");
  track->add_option("--dets", track_args.dets, "Input detections path")
      ->required();
  track->add_option("--out", track_args.out, "Output detections path")
      ->required();
  track->add_option("--fuse-weight", track_args.cfg.det_weight,
                    "Detection weight in box fusion");
  track->add_option("--match-iou", track_args.cfg.match_iou,
                    "Association IoU gate");
  track->add_option("--max-misses", track_args.cfg.max_misses,
                    "Frames a track may coast before being dropped");

  PseudoArgs pseudo_args;
  auto* pseudo = app.add_subcommand(
      "pseudo-label", "Filter candidate boxes into accepted pseudo-labels");
  pseudo->add_option("--dets", pseudo_args.dets, "Candidate detections path")
      ->required();
  pseudo->add_option("--refs", pseudo_args.refs, "Reference detections path")
      ->required();
  pseudo->add_option("--out", pseudo_args.out, "Accepted detections path")
      ->required();
  pseudo->add_option("--iou-min", pseudo_args.iou_min,
                     "Minimum IoU against same-class references");
  pseudo->add_option("--score-min", pseudo_args.score_min,
                     "Minimum detection score");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand(
      "eval", "Evaluate detections against ground truth (AP and presence F1)");
  eval->add_option("--dets", eval_args.dets, "Predicted detections path")
      ->required();
  eval->add_option("--gt", eval_args.gt, "Ground-truth detections path")
      ->required();
  eval->add_option("--iou", eval_args.iou, "IoU required for a true positive");
  eval->add_option("--out", eval_args.out, "Optional JSON report path");
  eval->add_flag("--ignore-track-boxes", eval_args.ignore_track_boxes,
                 "Exclude tracker-emitted boxes from evaluation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (localize->parsed()) return run_localize(localize_args);
    if (calibrate->parsed()) return run_calibrate(calibrate_args);
    if (classify->parsed()) return run_classify(classify_args);
    if (track->parsed()) return run_track(track_args);
    if (pseudo->parsed()) return run_pseudo(pseudo_args);
    if (eval->parsed()) return run_eval(eval_args);
  } catch (const surgpipe::EmptyGroundTruthError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitEvalDomainError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInputError;
  }
  return kExitOk;
}

#pragma once

// End-to-end glue shared by the command-line tool and the acceptance run:
// simulated splits, motion-map training and inference, detection rescoring
// with a learned score head, tracking and pooled evaluation.

#include <cstdint>
#include <string>
#include <vector>

#include "mmtrack/io.hpp"
#include "mmtrack/metrics.hpp"
#include "mmtrack/mmloss.hpp"
#include "mmtrack/motionnet.hpp"
#include "mmtrack/simworld.hpp"
#include "mmtrack/tracker.hpp"

namespace mmtrack {

// `count` sequences of one scenario with seeds base_seed, base_seed + 1, ...
std::vector<SequenceData> generate_split(const std::string& scenario_name, std::uint64_t base_seed,
                                         std::size_t count, std::size_t n_frames);

// Training recipe for the motion network at simulator scale.
struct MotionRecipe {
  MotionNetConfig net;
  SgdConfig sgd;
  std::size_t pair_stride = 3;  // use every k-th consecutive frame pair

  MotionRecipe();
};

std::vector<MotionSample> motion_dataset(const std::vector<SequenceData>& seqs, std::size_t pair_stride);

// Predicted and exact maps for every frame transition of a sequence.
std::vector<MotionMap> predict_maps(const MotionNet& net, const SequenceData& seq);
std::vector<MotionMap> exact_maps(const SequenceData& seq);

// Score head over simulated detector evidence: positives are detections of
// real objects (labelled with their apparent speed), negatives are clutter.
std::vector<ScoreSample> detection_score_samples(const std::vector<SequenceData>& seqs);
// Detections of a sequence with scores replaced by the head's output.
std::vector<FrameDetections> rescore_detections(const SequenceData& seq, const ScoreHead& head);

struct SplitMetrics {
  double mota = 0.0;  // pooled over all sequences of the split
  double idf1 = 0.0;
  std::vector<EvalRow> rows;  // one per sequence
};

EvalRow evaluate_tracks(const std::string& name, const TrajectorySet& gt, const TrajectorySet& pred);
SplitMetrics pool_rows(std::vector<EvalRow> rows);

// Tracks every sequence with the given detections and motion source and
// pools the metrics. `maps_per_seq` is required for the motion-map model.
SplitMetrics track_and_evaluate(const std::vector<SequenceData>& seqs,
                                const std::vector<std::vector<FrameDetections>>& dets_per_seq,
                                MotionModel model, const TrackerConfig& cfg,
                                const std::vector<std::vector<MotionMap>>* maps_per_seq = nullptr);

}  // namespace mmtrack

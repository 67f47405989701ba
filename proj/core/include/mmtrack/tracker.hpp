#pragma once

// Online predict-and-associate tracking with a pluggable motion model and
// two-stage, score-partitioned IoU matching.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmtrack/box.hpp"
#include "mmtrack/kalman.hpp"
#include "mmtrack/motion_map.hpp"
#include "mmtrack/trajectory.hpp"

namespace mmtrack {

struct Detection {
  Box box;
  double score = 1.0;
  int category = 0;
};

using FrameDetections = std::vector<Detection>;

enum class TrackStatus { tentative, active, lost };

struct Track {
  int id = 0;
  Box box;
  int category = 0;
  double score = 0.0;
  int age_since_update = 0;
  int hit_count = 0;
  TrackStatus status = TrackStatus::tentative;
  std::optional<KalmanBoxFilter> filter;
};

struct TrackerConfig {
  double score_high = 0.6;
  double score_low = 0.1;
  double iou_gate = 0.3;
  int max_age = 30;
  int min_hits = 2;
  // Keep applying motion-map prediction to lost tracks during gaps.
  bool predict_while_lost = true;

  void validate() const;
};

enum class MotionModel { motion_map, kalman, zero };
std::string to_string(MotionModel model);
MotionModel parse_motion_model(const std::string& name);

struct Displacement {
  double dx = 0.0;
  double dy = 0.0;
};

// Value of the cell containing (cx, cy), clamped to the grid.
Displacement sample_motion(const MotionMap& map, double cx, double cy);

// Advances every track one frame and returns the predicted boxes.
// `map` is required for the motion-map model.
std::vector<Box> predict_step(std::vector<Track>& tracks, MotionModel model,
                              const MotionMap* map, const TrackerConfig& cfg = {});

struct AssociationResult {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (track, detection)
  std::vector<std::size_t> new_track_candidates;              // detection indices
  std::vector<std::size_t> unmatched_tracks;
  std::size_t stage1_matches = 0;
};

AssociationResult associate_two_stage(const std::vector<Box>& predicted,
                                      const FrameDetections& detections,
                                      const TrackerConfig& cfg);

class Tracker {
 public:
  Tracker(MotionModel model, TrackerConfig cfg);

  // Processes one frame. `map` is the motion from the previous frame to
  // this one (ignored for the first frame and by non-map models).
  std::vector<TrackedBox> step(const FrameDetections& detections, const MotionMap* map);

  const std::vector<Track>& tracks() const { return tracks_; }

 private:
  MotionModel model_;
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  std::size_t frame_ = 0;
};

// Runs a whole sequence. For the motion-map model, `maps[f]` is the motion
// from frame f to f + 1 and must exist for every frame transition.
TrajectorySet track_sequence(const std::vector<FrameDetections>& detections, MotionModel model,
                             const TrackerConfig& cfg,
                             const std::vector<MotionMap>* maps = nullptr);

}  // namespace mmtrack

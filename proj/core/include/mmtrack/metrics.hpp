#pragma once

// CLEAR-MOT accuracy and identity F1 against ground truth.

#include <cstddef>
#include <vector>

#include "mmtrack/trajectory.hpp"

namespace mmtrack {

struct FrameMotDetail {
  std::size_t matches = 0;
  std::size_t false_positives = 0;
  std::size_t misses = 0;
  std::size_t id_switches = 0;
};

struct MotaResult {
  double mota = 0.0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t idsw = 0;
  std::size_t gt_total = 0;
  std::vector<FrameMotDetail> frames;
};

// Matches from the previous frame are carried forward while their IoU stays
// at or above the threshold; the remaining boxes are assigned by Hungarian
// on 1 - IoU. An identity switch is a GT identity matched to a different
// prediction than at its previous match. MOTA = 1 - (FN + FP + IDSW) / GT,
// which is negative when errors outnumber GT boxes.
MotaResult clear_mota(const TrajectorySet& gt, const TrajectorySet& pred, double iou_thresh = 0.5);

struct Idf1Result {
  double idf1 = 0.0;
  std::size_t idtp = 0;
  std::size_t idfp = 0;
  std::size_t idfn = 0;
};

// Global one-to-one identity pairing maximizing the number of frames in
// which paired boxes overlap at or above the threshold.
Idf1Result idf1(const TrajectorySet& gt, const TrajectorySet& pred, double iou_thresh = 0.5);

}  // namespace mmtrack

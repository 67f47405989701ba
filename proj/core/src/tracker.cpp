#include "mmtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmtrack/hungarian.hpp"

namespace mmtrack {

void TrackerConfig::validate() const {
  if (!(score_low >= 0.0 && score_low < score_high && score_high <= 1.0))
    throw std::invalid_argument("tracker: need 0 <= score_low < score_high <= 1");
  if (!(iou_gate > 0.0 && iou_gate < 1.0)) throw std::invalid_argument("tracker: iou_gate must be in (0, 1)");
  if (max_age < 0 || min_hits < 1) throw std::invalid_argument("tracker: max_age >= 0 and min_hits >= 1 required");
}

std::string to_string(MotionModel model) {
  switch (model) {
    case MotionModel::motion_map: return "mmap";
    case MotionModel::kalman: return "KF";
    case MotionModel::zero: return "zero";
  }
  return "?";
}

MotionModel parse_motion_model(const std::string& name) {
  if (name == "mmap" || name == "motion-map") return MotionModel::motion_map;
  if (name == "kalman" || name == "KF" || name == "kf") return MotionModel::kalman;
  if (name == "zero") return MotionModel::zero;
  throw std::invalid_argument("unknown motion model '" + name + "' (expected mmap, kalman, zero)");
}

Displacement sample_motion(const MotionMap& map, double cx, double cy) {
  if (map.rows == 0 || map.cols == 0) throw std::invalid_argument("sample_motion: empty map");
  const double s = map.stride;
  const auto clamp_index = [](double v, std::size_t n) {
    const double f = std::floor(v);
    if (!(f > 0.0)) return std::size_t{0};
    return std::min(static_cast<std::size_t>(f), n - 1);
  };
  const std::size_t r = clamp_index(cy / s, map.rows);
  const std::size_t c = clamp_index(cx / s, map.cols);
  return {map.dx(r, c), map.dy(r, c)};
}

std::vector<Box> predict_step(std::vector<Track>& tracks, MotionModel model, const MotionMap* map,
                              const TrackerConfig& cfg) {
  std::vector<Box> predicted;
  predicted.reserve(tracks.size());
  for (auto& t : tracks) {
    switch (model) {
      case MotionModel::zero: break;
      case MotionModel::kalman:
        if (!t.filter) t.filter.emplace(t.box);
        t.box = t.filter->predict();
        break;
      case MotionModel::motion_map: {
        if (map == nullptr) throw std::invalid_argument("predict_step: motion-map model needs a map");
        if (t.status == TrackStatus::lost && !cfg.predict_while_lost) break;
        const Displacement d = sample_motion(*map, t.box.cx, t.box.cy);
        t.box.cx += d.dx;
        t.box.cy += d.dy;
        break;
      }
    }
    predicted.push_back(t.box);
  }
  return predicted;
}

namespace {

constexpr double kGatedCost = 1e6;

// Hungarian on 1 - IoU between the given track and detection subsets;
// pairs below the gate are never returned.
std::vector<std::pair<std::size_t, std::size_t>> match_subset(
    const std::vector<Box>& predicted, const std::vector<std::size_t>& track_idx,
    const FrameDetections& dets, const std::vector<std::size_t>& det_idx, double gate) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (track_idx.empty() || det_idx.empty()) return out;
  CostMatrix cost(track_idx.size(), det_idx.size());
  for (std::size_t i = 0; i < track_idx.size(); ++i)
    for (std::size_t j = 0; j < det_idx.size(); ++j) {
      const double v = iou(predicted[track_idx[i]], dets[det_idx[j]].box);
      cost(i, j) = v >= gate ? 1.0 - v : kGatedCost;
    }
  for (const auto& [i, j] : hungarian(cost).pairs)
    if (cost(i, j) < kGatedCost) out.emplace_back(track_idx[i], det_idx[j]);
  return out;
}

}  // namespace

AssociationResult associate_two_stage(const std::vector<Box>& predicted,
                                      const FrameDetections& detections,
                                      const TrackerConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> high, low;
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (detections[j].score >= cfg.score_high)
      high.push_back(j);
    else if (detections[j].score >= cfg.score_low)
      low.push_back(j);
  }
  std::vector<std::size_t> tracks(predicted.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) tracks[i] = i;

  AssociationResult result;
  auto stage1 = match_subset(predicted, tracks, detections, high, cfg.iou_gate);
  result.stage1_matches = stage1.size();
  std::vector<char> track_done(predicted.size(), 0), det_done(detections.size(), 0);
  for (const auto& [t, d] : stage1) {
    track_done[t] = det_done[d] = 1;
    result.matches.emplace_back(t, d);
  }

  std::vector<std::size_t> remaining;
  for (std::size_t t : tracks)
    if (!track_done[t]) remaining.push_back(t);
  for (const auto& [t, d] : match_subset(predicted, remaining, detections, low, cfg.iou_gate)) {
    track_done[t] = det_done[d] = 1;
    result.matches.emplace_back(t, d);
  }

  for (std::size_t j : high)
    if (!det_done[j]) result.new_track_candidates.push_back(j);
  for (std::size_t t : tracks)
    if (!track_done[t]) result.unmatched_tracks.push_back(t);
  std::sort(result.matches.begin(), result.matches.end());
  return result;
}

Tracker::Tracker(MotionModel model, TrackerConfig cfg) : model_(model), cfg_(cfg) { cfg_.validate(); }

std::vector<TrackedBox> Tracker::step(const FrameDetections& detections, const MotionMap* map) {
  for (const auto& d : detections)
    if (!d.box.valid()) throw std::invalid_argument("tracker: detection with non-positive size");

  std::vector<Box> predicted;
  if (frame_ == 0 || model_ != MotionModel::motion_map) {
    predicted = predict_step(tracks_, model_, nullptr, cfg_);
  } else {
    if (map == nullptr)
      throw std::invalid_argument("tracker: missing motion map for frame " + std::to_string(frame_));
    predicted = predict_step(tracks_, model_, map, cfg_);
  }

  const AssociationResult assoc = associate_two_stage(predicted, detections, cfg_);
  std::vector<char> matched(tracks_.size(), 0);
  for (const auto& [ti, di] : assoc.matches) {
    Track& t = tracks_[ti];
    const Detection& d = detections[di];
    matched[ti] = 1;
    t.box = d.box;
    if (t.filter) t.filter->update(d.box);
    t.score = d.score;
    t.category = d.category;
    t.age_since_update = 0;
    ++t.hit_count;
    if (t.status == TrackStatus::lost || t.hit_count >= cfg_.min_hits) t.status = TrackStatus::active;
  }

  std::vector<Track> survivors;
  survivors.reserve(tracks_.size() + assoc.new_track_candidates.size());
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    Track& t = tracks_[i];
    if (!matched[i]) {
      ++t.age_since_update;
      if (t.status == TrackStatus::tentative || t.age_since_update > cfg_.max_age) continue;
      t.status = TrackStatus::lost;
    }
    survivors.push_back(std::move(t));
  }
  for (std::size_t di : assoc.new_track_candidates) {
    const Detection& d = detections[di];
    Track t;
    t.id = next_id_++;
    t.box = d.box;
    t.category = d.category;
    t.score = d.score;
    t.hit_count = 1;
    t.status = cfg_.min_hits <= 1 ? TrackStatus::active : TrackStatus::tentative;
    if (model_ == MotionModel::kalman) t.filter.emplace(d.box);
    survivors.push_back(std::move(t));
  }
  tracks_ = std::move(survivors);
  ++frame_;

  std::vector<TrackedBox> out;
  for (const auto& t : tracks_)
    if (t.status == TrackStatus::active && t.age_since_update == 0)
      out.push_back({t.id, t.box, t.score, t.category});
  std::sort(out.begin(), out.end(), [](const TrackedBox& a, const TrackedBox& b) { return a.id < b.id; });
  return out;
}

TrajectorySet track_sequence(const std::vector<FrameDetections>& detections, MotionModel model,
                             const TrackerConfig& cfg, const std::vector<MotionMap>* maps) {
  if (model == MotionModel::motion_map) {
    const std::size_t needed = detections.empty() ? 0 : detections.size() - 1;
    if (maps == nullptr || maps->size() < needed)
      throw std::invalid_argument("track_sequence: missing motion map for frame " +
                                  std::to_string(maps == nullptr ? 1 : maps->size() + 1));
  }
  Tracker tracker(model, cfg);
  TrajectorySet out;
  for (std::size_t f = 0; f < detections.size(); ++f) {
    const MotionMap* map = (model == MotionModel::motion_map && f > 0) ? &(*maps)[f - 1] : nullptr;
    out.frames.push_back(tracker.step(detections[f], map));
  }
  return out;
}

}  // namespace mmtrack

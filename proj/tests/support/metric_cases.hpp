#pragma once

// Hand-computed tracking-metric cases and random scene builders shared by
// the metric unit tests and the acceptance run.

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mmtrack/metrics.hpp"

namespace mmtrack::testing {

inline Box square_at(double x, double y) { return Box{x, y, 10, 10}; }

inline TrajectorySet empty_frames(std::size_t n) {
  TrajectorySet t;
  t.frames.resize(n);
  return t;
}

struct MetricCase {
  std::string name;
  TrajectorySet gt, pred;
  double mota;
  double idf1;
};

// Each expectation is worked out by hand in the comment beside it.
inline std::vector<MetricCase> metric_micro_cases() {
  std::vector<MetricCase> out;
  {
    // one static object, tracked perfectly: nothing to count
    MetricCase c{"perfect", empty_frames(4), empty_frames(4), 1.0, 1.0};
    for (std::size_t f = 0; f < 4; ++f) c.gt.frames[f] = c.pred.frames[f] = {{1, square_at(10, 10), 1, 0}};
    out.push_back(c);
  }
  {
    // 10 GT boxes; FN 1 (frame 5), FP 1 (frame 5), IDSW 1 (8 -> 9): MOTA 0.7.
    // IDTP = 5 (1<->7) + 2 (2<->8 or 2<->9) = 7 of 10 GT and 10 predicted: IDF1 0.7
    MetricCase c{"miss_fp_switch", empty_frames(5), empty_frames(5), 0.7, 0.7};
    for (std::size_t f = 0; f < 5; ++f) {
      c.gt.frames[f] = {{1, square_at(10, 10), 1, 0}, {2, square_at(50, 50), 1, 0}};
      c.pred.frames[f].push_back({7, square_at(10, 10), 1, 0});
      if (f < 2) c.pred.frames[f].push_back({8, square_at(50, 50), 1, 0});
      else if (f < 4) c.pred.frames[f].push_back({9, square_at(51, 50), 1, 0});
    }
    c.pred.frames[4].push_back({10, square_at(90, 90), 1, 0});
    out.push_back(c);
  }
  {
    // nothing predicted: every GT box is a miss
    MetricCase c{"empty_prediction", empty_frames(5), empty_frames(5), 0.0, 0.0};
    for (auto& f : c.gt.frames) f = {{1, square_at(10, 10), 1, 0}, {2, square_at(40, 10), 1, 0}};
    out.push_back(c);
  }
  {
    // 2 GT boxes, 5 distant predictions: MOTA 1 - 7/2
    MetricCase c{"false_positive_flood", empty_frames(2), empty_frames(2), -2.5, 0.0};
    c.gt.frames[0] = {{1, square_at(10, 10), 1, 0}};
    c.gt.frames[1] = {{1, square_at(12, 10), 1, 0}};
    for (int k = 0; k < 5; ++k) c.pred.frames[k % 2].push_back({20 + k, square_at(60 + 12 * k, 60), 1, 0});
    out.push_back(c);
  }
  {
    // frame 4 prediction is offset by 6 px (IoU 0.25): FP + FN of 4 GT -> 0.5;
    // IDTP 3 of 4 + 4 -> IDF1 0.75
    MetricCase c{"offset_box", empty_frames(4), empty_frames(4), 0.5, 0.75};
    for (std::size_t f = 0; f < 4; ++f) {
      c.gt.frames[f] = {{1, square_at(10.0 * f, 0), 1, 0}};
      c.pred.frames[f] = {{5, square_at(10.0 * f + (f == 3 ? 6.0 : 0.0), 0), 1, 0}};
    }
    out.push_back(c);
  }
  {
    // identity changes halfway: one switch in 10 -> 0.9; IDTP 5 of 10 + 10 -> 0.5
    MetricCase c{"half_covered", empty_frames(10), empty_frames(10), 0.9, 0.5};
    for (std::size_t f = 0; f < 10; ++f) {
      c.gt.frames[f] = {{1, square_at(5.0 * f, 20), 1, 0}};
      c.pred.frames[f] = {{f < 5 ? 3 : 4, square_at(5.0 * f, 20), 1, 0}};
    }
    out.push_back(c);
  }
  return out;
}

// Objects drifting right, each present in a frame with probability 0.8.
inline TrajectorySet random_scene(std::mt19937_64& rng, std::size_t frames, int ids) {
  std::uniform_real_distribution<double> pos(0, 60);
  std::bernoulli_distribution present(0.8);
  TrajectorySet t = empty_frames(frames);
  for (int id = 1; id <= ids; ++id) {
    double x = pos(rng), y = pos(rng);
    for (auto& f : t.frames) {
      x += 2.0;
      if (present(rng)) f.push_back({id, square_at(x, y), 1.0, 0});
    }
  }
  return t;
}

// Perturbs a ground-truth set into plausible tracker output.
inline TrajectorySet noisy_copy(const TrajectorySet& gt, std::mt19937_64& rng) {
  std::bernoulli_distribution drop(0.15), swap_id(0.1), fp(0.2);
  std::normal_distribution<double> jit(0.0, 2.0);
  std::uniform_real_distribution<double> pos(0, 80);
  TrajectorySet out = empty_frames(gt.frame_count());
  std::map<int, int> current;
  int next = 100;
  for (std::size_t f = 0; f < gt.frame_count(); ++f) {
    for (const auto& b : gt.frames[f]) {
      if (drop(rng)) continue;
      if (!current.count(b.id) || swap_id(rng)) current[b.id] = next++;
      out.frames[f].push_back({current[b.id], Box{b.box.cx + jit(rng), b.box.cy + jit(rng), 10, 10}, 1.0, 0});
    }
    if (fp(rng)) out.frames[f].push_back({next++, square_at(pos(rng), pos(rng)), 1.0, 0});
  }
  return out;
}

// Same predictions under a shuffled set of fresh identities.
inline TrajectorySet relabeled(const TrajectorySet& pred, std::mt19937_64& rng) {
  std::vector<int> ids;
  for (const auto& f : pred.frames)
    for (const auto& b : f) ids.push_back(b.id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<int> renamed(ids.size());
  for (std::size_t i = 0; i < renamed.size(); ++i) renamed[i] = 1000 + static_cast<int>(i);
  std::shuffle(renamed.begin(), renamed.end(), rng);
  TrajectorySet out = pred;
  for (auto& f : out.frames)
    for (auto& b : f) b.id = renamed[static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), b.id) - ids.begin())];
  return out;
}

}  // namespace mmtrack::testing

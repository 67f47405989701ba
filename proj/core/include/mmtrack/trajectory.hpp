#pragma once

#include <cstddef>
#include <vector>

#include "mmtrack/box.hpp"

namespace mmtrack {

struct TrackedBox {
  int id = 0;
  Box box;
  double score = 1.0;
  int category = 0;
};

// Per-frame boxes keyed by identity; frames are contiguous from 0.
struct TrajectorySet {
  std::vector<std::vector<TrackedBox>> frames;

  std::size_t frame_count() const { return frames.size(); }
  std::size_t box_count() const;
  // Throws if any frame repeats an identity.
  void validate() const;

  bool operator==(const TrajectorySet&) const;
};

// Ground-truth annotations as a trajectory set.
TrajectorySet to_trajectories(const std::vector<FrameAnnotations>& frames);

}  // namespace mmtrack

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmtrack/tracker.hpp"

namespace mmtrack::cli {

// Flags every command accepts. `command_line` is recorded in output headers.
struct Common {
  std::uint64_t seed = 1;
  std::string out;
  std::string config;
  std::string command_line;
};

struct SimgenOptions {
  Common common;
  std::string scenario = "pan";
  std::size_t sequences = 1;
  std::size_t frames = 100;
  // scene keys picked up from the config file
  std::vector<std::pair<std::string, std::string>> scene_overrides;
};

struct TrainOptions {
  Common common;
  std::string data;
  int epochs = 10;
  double learning_rate = 1e-2;
  int batch_size = 4;
  double momentum = 0.9;
  std::size_t width = 16;
  std::size_t state = 8;
  int radius = 3;
  std::string branches = "full";
  std::size_t pair_stride = 3;
};

struct TrackOptions {
  Common common;
  std::string data;
  std::string motion = "kalman";
  std::string checkpoint;
  bool exact_maps = false;
  TrackerConfig tracker;
};

struct EvalOptions {
  Common common;
  std::string data;
  std::string results;
};

struct AblateOptions {
  Common common;
  std::string scenario = "pan+blur";
  std::size_t train_sequences = 4;
  std::size_t test_sequences = 2;
  std::size_t frames = 60;
  int epochs = 4;
  std::size_t pair_stride = 3;
  std::vector<std::string> motions{"zero", "kalman", "local", "local+V", "local+H", "full"};
  std::vector<std::string> losses{"CE", "MMLoss"};
  TrackerConfig tracker;
};

struct PlotOptions {
  Common common;
  std::string kind = "margin";
  std::string input;
  std::vector<double> s_values{5, 10, 20};
  double x_max = 50;
};

void run_simgen(const SimgenOptions& o);
void run_train(const TrainOptions& o);
void run_track(const TrackOptions& o);
void run_eval(const EvalOptions& o);
void run_ablate(const AblateOptions& o);
void run_plot(const PlotOptions& o);

}  // namespace mmtrack::cli

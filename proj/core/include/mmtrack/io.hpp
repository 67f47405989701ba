#pragma once

// File formats. Text outputs open with '#' comment lines recording the
// producing command, seed and format version; readers skip them.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mmtrack/metrics.hpp"
#include "mmtrack/mmloss.hpp"
#include "mmtrack/simworld.hpp"
#include "mmtrack/trajectory.hpp"

namespace mmtrack {

inline constexpr int kFormatVersion = 1;

struct OutputHeader {
  std::string kind;          // e.g. "gt", "results", "eval"
  std::string command_line;
  std::uint64_t seed = 0;
};

void write_header(std::ostream& os, const OutputHeader& h);

// Fixed-precision number formatting shared by every CSV writer.
std::string fmt(double v, int decimals = 6);

// MMAP: "MMAP", u32 rows, u32 cols, u32 channels (2), then float32 LE
// values row-major with the two channels interleaved per cell.
void write_motion_map(const std::filesystem::path& path, const MotionMap& map);
MotionMap read_motion_map(const std::filesystem::path& path, int stride = 1);

// gt.csv: frame, id, bb_left, bb_top, bb_width, bb_height, 1, category, 1 (frames 1-based)
void write_gt_csv(const std::filesystem::path& path, const std::vector<FrameAnnotations>& frames,
                  const OutputHeader& h);
std::vector<FrameAnnotations> read_gt_csv(const std::filesystem::path& path, std::size_t n_frames);

// det.csv: frame, bb_left, bb_top, bb_width, bb_height, score, category, 1
void write_det_csv(const std::filesystem::path& path, const std::vector<FrameDetections>& frames,
                   const OutputHeader& h);
std::vector<FrameDetections> read_det_csv(const std::filesystem::path& path, std::size_t n_frames);

// results: frame, id, bb_left, bb_top, bb_width, bb_height, score, category
void write_results_csv(const std::filesystem::path& path, const TrajectorySet& tracks, const OutputHeader& h);
TrajectorySet read_results_csv(const std::filesystem::path& path, std::size_t n_frames);

struct EvalRow {
  std::string sequence;
  MotaResult mota;
  Idf1Result idf1;
};
void write_eval_report(const std::filesystem::path& path, const std::vector<EvalRow>& rows,
                       const OutputHeader& h);

void write_loss_curve(const std::filesystem::path& path, const std::vector<double>& epoch_loss,
                      const OutputHeader& h);
std::vector<double> read_loss_curve(const std::filesystem::path& path);

void write_score_experiment(const std::filesystem::path& path, const std::vector<ScoreExperimentRow>& rows,
                            const OutputHeader& h);

// Plain `key = value` lines; '#' starts a comment. Duplicate keys: last wins.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

// Scene config snapshot (key=value) including the frame count.
void write_scene_config(const std::filesystem::path& path, const SceneConfig& cfg, std::size_t n_frames,
                        const OutputHeader& h);
SceneConfig read_scene_config(const std::filesystem::path& path, std::size_t* n_frames = nullptr);
// Applies known keys from a key/value map; unknown keys are rejected.
void apply_scene_overrides(SceneConfig& cfg, const std::map<std::string, std::string>& kv);

// One sequence directory: config.txt, camera.csv, gt.csv, det.csv and
// optionally flow/NNNN.bin for every frame pair.
void write_sequence(const std::filesystem::path& dir, const SequenceData& seq, const OutputHeader& h,
                    bool with_flow = true);
// Rebuilds annotations, camera, poses and plain detections from disk;
// detection evidence is not stored and comes back zeroed.
SequenceData read_sequence(const std::filesystem::path& dir);

// Sequence directories (seqNNN) under a dataset root, sorted by name.
std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& root);

}  // namespace mmtrack

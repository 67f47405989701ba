#include "mmtrack/pipeline.hpp"

#include <cstdio>
#include <stdexcept>

namespace mmtrack {

std::vector<SequenceData> generate_split(const std::string& scenario_name, std::uint64_t base_seed,
                                         std::size_t count, std::size_t n_frames) {
  std::vector<SequenceData> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_sequence(scenario(scenario_name, base_seed + i), n_frames));
  return out;
}

MotionRecipe::MotionRecipe() {
  // Narrower than the module default and trained with momentum: the
  // simulator's scenes are small and a few hundred pairs go a long way.
  net.width = 16;
  sgd.learning_rate = 1e-2;
  sgd.momentum = 0.9;
  sgd.batch_size = 4;
  sgd.epochs = 8;
}

std::vector<MotionSample> motion_dataset(const std::vector<SequenceData>& seqs, std::size_t pair_stride) {
  std::vector<MotionSample> out;
  for (const auto& s : seqs) {
    auto v = motion_samples(s, pair_stride);
    out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  return out;
}

std::vector<MotionMap> predict_maps(const MotionNet& net, const SequenceData& seq) {
  std::vector<MotionMap> maps;
  if (seq.frame_count() < 2) return maps;
  FeaturePyramid prev = rasterize_features(seq, 0);
  for (std::size_t t = 0; t + 1 < seq.frame_count(); ++t) {
    FeaturePyramid next = rasterize_features(seq, t + 1);
    maps.push_back(net.predict(prev, next));
    prev = std::move(next);
  }
  return maps;
}

std::vector<MotionMap> exact_maps(const SequenceData& seq) {
  std::vector<MotionMap> maps;
  for (std::size_t t = 0; t + 1 < seq.frame_count(); ++t) maps.push_back(exact_motion_map(seq, t));
  return maps;
}

std::vector<ScoreSample> detection_score_samples(const std::vector<SequenceData>& seqs) {
  std::vector<ScoreSample> out;
  for (const auto& s : seqs)
    for (const auto& frame : s.detections)
      for (const auto& d : frame) out.push_back({d.evidence, d.gt_id >= 0 ? 1 : 0, d.gt_id >= 0 ? d.speed : 0.0});
  return out;
}

std::vector<FrameDetections> rescore_detections(const SequenceData& seq, const ScoreHead& head) {
  std::vector<FrameDetections> out(seq.frame_count());
  for (std::size_t t = 0; t < seq.frame_count(); ++t)
    for (const auto& d : seq.detections[t]) {
      Detection r = d.det;
      r.score = head.score(d.evidence);
      out[t].push_back(r);
    }
  return out;
}

EvalRow evaluate_tracks(const std::string& name, const TrajectorySet& gt, const TrajectorySet& pred) {
  return {name, clear_mota(gt, pred), idf1(gt, pred)};
}

SplitMetrics pool_rows(std::vector<EvalRow> rows) {
  SplitMetrics m;
  std::size_t errors = 0, gt_total = 0, idtp = 0, idfp = 0, idfn = 0;
  for (const auto& r : rows) {
    errors += r.mota.fp + r.mota.fn + r.mota.idsw;
    gt_total += r.mota.gt_total;
    idtp += r.idf1.idtp;
    idfp += r.idf1.idfp;
    idfn += r.idf1.idfn;
  }
  m.mota = gt_total ? 1.0 - static_cast<double>(errors) / static_cast<double>(gt_total) : 0.0;
  const std::size_t denom = 2 * idtp + idfp + idfn;
  m.idf1 = denom ? 2.0 * static_cast<double>(idtp) / static_cast<double>(denom) : 0.0;
  m.rows = std::move(rows);
  return m;
}

SplitMetrics track_and_evaluate(const std::vector<SequenceData>& seqs,
                                const std::vector<std::vector<FrameDetections>>& dets_per_seq,
                                MotionModel model, const TrackerConfig& cfg,
                                const std::vector<std::vector<MotionMap>>* maps_per_seq) {
  if (dets_per_seq.size() != seqs.size()) throw std::invalid_argument("track_and_evaluate: detections per sequence mismatch");
  if (model == MotionModel::motion_map && (!maps_per_seq || maps_per_seq->size() != seqs.size()))
    throw std::invalid_argument("track_and_evaluate: motion maps required for every sequence");
  std::vector<EvalRow> rows;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto* maps = model == MotionModel::motion_map ? &(*maps_per_seq)[i] : nullptr;
    const TrajectorySet pred = track_sequence(dets_per_seq[i], model, cfg, maps);
    char name[16];
    std::snprintf(name, sizeof name, "seq%03zu", i);
    rows.push_back(evaluate_tracks(name, to_trajectories(seqs[i].annotations), pred));
  }
  return pool_rows(std::move(rows));
}

}  // namespace mmtrack

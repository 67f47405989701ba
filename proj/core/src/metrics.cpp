#include "mmtrack/metrics.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "mmtrack/hungarian.hpp"

namespace mmtrack {

std::size_t TrajectorySet::box_count() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.size();
  return n;
}

void TrajectorySet::validate() const {
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::vector<int> ids;
    for (const auto& b : frames[f]) ids.push_back(b.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw std::invalid_argument("trajectories: duplicate identity in frame " + std::to_string(f));
  }
}

bool TrajectorySet::operator==(const TrajectorySet& other) const {
  if (frames.size() != other.frames.size()) return false;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& a = frames[f];
    const auto& b = other.frames[f];
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].id != b[i].id || !(a[i].box == b[i].box) || a[i].score != b[i].score ||
          a[i].category != b[i].category)
        return false;
  }
  return true;
}

TrajectorySet to_trajectories(const std::vector<FrameAnnotations>& frames) {
  TrajectorySet out;
  for (const auto& f : frames) {
    std::vector<TrackedBox> boxes;
    for (const auto& a : f) boxes.push_back({a.id, a.box, 1.0, a.category});
    out.frames.push_back(std::move(boxes));
  }
  return out;
}

namespace {

void check_inputs(const TrajectorySet& gt, const TrajectorySet& pred, double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0))
    throw std::invalid_argument("metrics: iou_thresh must be in (0, 1)");
  if (gt.frames.size() != pred.frames.size())
    throw std::invalid_argument("metrics: mismatched frame ranges (" + std::to_string(gt.frames.size()) +
                                " ground-truth frames vs " + std::to_string(pred.frames.size()) + " predicted)");
  gt.validate();
  pred.validate();
}

}  // namespace

MotaResult clear_mota(const TrajectorySet& gt, const TrajectorySet& pred, double iou_thresh) {
  check_inputs(gt, pred, iou_thresh);
  MotaResult result;
  std::map<int, int> last_match;  // gt id -> pred id at its most recent match
  for (std::size_t f = 0; f < gt.frames.size(); ++f) {
    const auto& g = gt.frames[f];
    const auto& p = pred.frames[f];
    FrameMotDetail detail;
    std::vector<char> g_used(g.size(), 0), p_used(p.size(), 0);
    std::vector<std::pair<std::size_t, std::size_t>> matches;

    for (std::size_t i = 0; i < g.size(); ++i) {
      auto it = last_match.find(g[i].id);
      if (it == last_match.end()) continue;
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p_used[j] || p[j].id != it->second) continue;
        if (iou(g[i].box, p[j].box) >= iou_thresh) {
          g_used[i] = p_used[j] = 1;
          matches.emplace_back(i, j);
        }
        break;
      }
    }

    std::vector<std::size_t> gi, pj;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g_used[i]) gi.push_back(i);
    for (std::size_t j = 0; j < p.size(); ++j)
      if (!p_used[j]) pj.push_back(j);
    if (!gi.empty() && !pj.empty()) {
      constexpr double gated = 1e6;
      CostMatrix cost(gi.size(), pj.size());
      for (std::size_t a = 0; a < gi.size(); ++a)
        for (std::size_t b = 0; b < pj.size(); ++b) {
          const double v = iou(g[gi[a]].box, p[pj[b]].box);
          cost(a, b) = v >= iou_thresh ? 1.0 - v : gated;
        }
      for (const auto& [a, b] : hungarian(cost).pairs) {
        if (cost(a, b) >= gated) continue;
        g_used[gi[a]] = p_used[pj[b]] = 1;
        matches.emplace_back(gi[a], pj[b]);
      }
    }

    for (const auto& [i, j] : matches) {
      auto it = last_match.find(g[i].id);
      if (it != last_match.end() && it->second != p[j].id) ++detail.id_switches;
      last_match[g[i].id] = p[j].id;
    }
    detail.matches = matches.size();
    detail.misses = g.size() - matches.size();
    detail.false_positives = p.size() - matches.size();
    result.fp += detail.false_positives;
    result.fn += detail.misses;
    result.idsw += detail.id_switches;
    result.gt_total += g.size();
    result.frames.push_back(detail);
  }
  if (result.gt_total == 0) throw std::invalid_argument("clear_mota: ground truth has no boxes");
  result.mota = 1.0 - static_cast<double>(result.fn + result.fp + result.idsw) /
                          static_cast<double>(result.gt_total);
  return result;
}

Idf1Result idf1(const TrajectorySet& gt, const TrajectorySet& pred, double iou_thresh) {
  check_inputs(gt, pred, iou_thresh);
  std::map<int, std::size_t> gt_index, pred_index;
  for (const auto& f : gt.frames)
    for (const auto& b : f) gt_index.emplace(b.id, 0);
  for (const auto& f : pred.frames)
    for (const auto& b : f) pred_index.emplace(b.id, 0);
  std::size_t k = 0;
  for (auto& [id, idx] : gt_index) idx = k++;
  k = 0;
  for (auto& [id, idx] : pred_index) idx = k++;

  CostMatrix overlap(gt_index.size(), pred_index.size(), 0.0);
  for (std::size_t f = 0; f < gt.frames.size(); ++f)
    for (const auto& g : gt.frames[f])
      for (const auto& p : pred.frames[f])
        if (iou(g.box, p.box) >= iou_thresh) overlap(gt_index[g.id], pred_index[p.id]) += 1.0;

  Idf1Result result;
  if (overlap.rows > 0 && overlap.cols > 0) {
    CostMatrix cost = overlap;
    for (double& v : cost.values) v = -v;
    for (const auto& [r, c] : hungarian(cost).pairs) result.idtp += static_cast<std::size_t>(overlap(r, c));
  }
  const std::size_t gt_boxes = gt.box_count(), pred_boxes = pred.box_count();
  result.idfn = gt_boxes - result.idtp;
  result.idfp = pred_boxes - result.idtp;
  const double denom = 2.0 * result.idtp + result.idfp + result.idfn;
  result.idf1 = denom > 0.0 ? 2.0 * result.idtp / denom : 0.0;
  return result;
}

}  // namespace mmtrack

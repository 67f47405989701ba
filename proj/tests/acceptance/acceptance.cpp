// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every selected criterion passes.
//
//   mmtrack_acceptance <path-to-mmtrack-cli> [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/brute_force.hpp"
#include "../support/grad_cases.hpp"
#include "../support/metric_cases.hpp"
#include "../support/random.hpp"
#include "../support/scan_oracle.hpp"
#include "mmtrack/hungarian.hpp"
#include "mmtrack/pipeline.hpp"

using namespace mmtrack;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + ("failed: " + what);
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string f3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// ---- 1: scan oracle ---------------------------------------------------------

Outcome scan_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> len(1, 64), width(1, 8), state(1, 16);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t L = len(rng), d = width(rng), N = state(rng);
    const SsmParams p = testing::random_ssm(d, N, rng);
    const Tensor x = testing::random_tensor({L, d}, rng, -2, 2, false);
    const auto want = testing::literal_scan({x.data().begin(), x.data().end()}, L, p);
    const Tensor got = selective_scan(x, p);
    for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  const double secs = seconds_since(t0);
  o.note("200 cases, max |err| " + sci(worst) + ", " + f3(secs) + " s");
  o.require(worst <= 1e-10, "max error > 1e-10");
  o.require(secs < 30.0, "runtime >= 30 s");
  return o;
}

// ---- 2: gradient suite ------------------------------------------------------

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  auto cases = testing::tensor_grad_cases();
  const auto model = testing::model_grad_cases();
  cases.insert(cases.end(), model.begin(), model.end());
  std::set<std::string> names;
  std::size_t failed = 0;
  double worst = 0.0;
  for (const auto& c : cases) {
    names.insert(c.name);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const GradCheckReport r = c.run(seed, 1e-5, 1e-4);
      worst = std::max(worst, r.max_error);
      if (!r.passed) {
        ++failed;
        o.require(false, c.name + " seed " + std::to_string(seed) + " (err " + sci(r.max_error) + ")");
      }
    }
  }
  for (const char* required : {"selective_scan", "motion_mamba_block", "level_motion_features", "motion_head", "mm_loss"})
    o.require(names.count(required) == 1, std::string("no gradient case for ") + required);
  const double secs = seconds_since(t0);
  o.note(std::to_string(cases.size()) + " ops x 20 seeds, " + std::to_string(failed) + " failures, worst rel err " +
         sci(worst) + ", " + f3(secs) + " s");
  o.require(secs < 300.0, "runtime >= 5 min");
  return o;
}

// ---- 3: margin suite ----------------------------------------------------------

Outcome margin_suite() {
  Outcome o;
  const auto with_s = [](double s) {
    MarginConfig c;
    c.s = s;
    return c;
  };
  for (double s : {1.0, 5.0, 10.0, 20.0})
    o.require(std::abs(motion_margin(0.0, with_s(s))) < 1e-12, "D(0) != 0 for s=" + f3(s));
  // s = 1 reaches its supremum to within one double ulp near x = 42, so
  // strictness on the integer grid is checked on the plotted scales.
  for (double s : {5.0, 10.0, 20.0}) {
    double prev = motion_margin(0.0, with_s(s));
    for (int x = 1; x <= 100; ++x) {
      const double d = motion_margin(x, with_s(s));
      if (!(d > prev)) o.require(false, "not increasing at x=" + std::to_string(x) + " for s=" + f3(s));
      prev = d;
    }
  }
  const double d30 = motion_margin(30.0, with_s(10));
  o.require(std::abs(d30 - 5.4660115) <= 1e-6, "D(30) = " + std::to_string(d30));
  o.require(d30 >= 0.85 * with_s(10).supremum(), "D(30) below 0.85 (s - M)");

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-10, 10);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> logits(32), zeros(32, 0.0);
    std::vector<int> labels(32);
    for (std::size_t i = 0; i < 32; ++i) {
      logits[i] = u(rng);
      labels[i] = static_cast<int>(rng() & 1U);
    }
    worst = std::max(worst, std::abs(mm_loss_with_margins(logits, labels, zeros) - binary_cross_entropy(logits, labels)));
  }
  o.require(worst <= 1e-12, "zero-margin mm_loss differs from BCE by " + sci(worst));
  o.note("D(30)=" + std::to_string(d30) + ", (s-M)=" + std::to_string(with_s(10).supremum()) +
         ", zero-margin |mm_loss - BCE| <= " + sci(worst));
  return o;
}

// ---- 4: matching and metric oracles ---------------------------------------------

Outcome metric_oracles() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> dim(1, 7);
    std::uniform_real_distribution<double> u(-5, 5);
    CostMatrix c(dim(rng), dim(rng));
    for (double& v : c.values) v = u(rng);
    const Assignment a = hungarian(c);
    worst = std::max(worst, std::abs(a.total_cost - testing::brute_force_assignment(c)));
    if (a.pairs.size() != std::min(c.rows, c.cols)) o.require(false, "incomplete assignment, seed " + std::to_string(seed));
  }
  o.require(worst <= 1e-9, "Hungarian differs from brute force by " + sci(worst));

  const auto cases = testing::metric_micro_cases();
  for (const auto& c : cases) {
    const double m = clear_mota(c.gt, c.pred).mota, i = idf1(c.gt, c.pred).idf1;
    o.require(std::abs(m - c.mota) <= 1e-12, c.name + " MOTA " + std::to_string(m));
    o.require(std::abs(i - c.idf1) <= 1e-12, c.name + " IDF1 " + std::to_string(i));
  }

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const TrajectorySet gt = testing::random_scene(rng, 15, 5);
    const TrajectorySet pred = testing::noisy_copy(gt, rng);
    const TrajectorySet renamed = testing::relabeled(pred, rng);
    const auto a = clear_mota(gt, pred), b = clear_mota(gt, renamed);
    if (a.mota != b.mota || a.idsw != b.idsw || idf1(gt, pred).idf1 != idf1(gt, renamed).idf1)
      o.require(false, "relabeling changed metrics, seed " + std::to_string(seed));
  }
  o.note("100 Hungarian seeds (max diff " + sci(worst) + "), " + std::to_string(cases.size()) +
         " micro-cases, 50 relabeling seeds");
  return o;
}

// ---- 5: perfect detections with exact maps -----------------------------------------

Outcome perfect_tracking() {
  Outcome o;
  // Perfect detections leave nothing to confirm and no gaps to bridge: report
  // tracks from their first frame and end them on their first miss. Keeping
  // lost tracks alive only lets a newcomer inherit a departed object's identity.
  TrackerConfig cfg;
  cfg.min_hits = 1;
  cfg.max_age = 0;
  TrackerConfig lingering = cfg;
  lingering.max_age = TrackerConfig{}.max_age;
  std::string summary, with_default_age;
  for (const auto& name : scenario_names()) {
    const auto seqs = generate_split(name, 300, 3, 100);
    std::vector<std::vector<FrameDetections>> dets;
    std::vector<std::vector<MotionMap>> maps;
    for (const auto& s : seqs) {
      auto& frames = dets.emplace_back(s.frame_count());
      for (std::size_t t = 0; t < s.frame_count(); ++t)
        for (const auto& a : s.annotations[t]) frames[t].push_back({a.box, 1.0, a.category});
      maps.push_back(exact_maps(s));
    }
    const SplitMetrics m = track_and_evaluate(seqs, dets, MotionModel::motion_map, cfg, &maps);
    for (const auto& r : m.rows)
      if (r.mota.mota != 1.0 || r.idf1.idf1 != 1.0)
        o.require(false, name + " " + r.sequence + " MOTA " + std::to_string(r.mota.mota) + " IDF1 " +
                             std::to_string(r.idf1.idf1));
    summary += (summary.empty() ? "" : ", ") + name + " " + f3(m.mota) + "/" + f3(m.idf1);
    const SplitMetrics l = track_and_evaluate(seqs, dets, MotionModel::motion_map, lingering, &maps);
    with_default_age += (with_default_age.empty() ? "" : ", ") + name + " " + f3(l.mota) + "/" + f3(l.idf1);
  }
  o.note("MOTA/IDF1 " + summary + "; with max_age " + std::to_string(lingering.max_age) + ": " + with_default_age);
  return o;
}

// ---- 6: learned motion map vs baselines ------------------------------------------------

Outcome motion_map_tracking() {
  Outcome o;
  const auto t0 = Clock::now();
  for (const char* name : {"pan", "rotate"}) {
    const auto train = generate_split(name, 100, 10, 100);
    const auto test = generate_split(name, 900, 5, 100);
    const MotionRecipe recipe;
    MotionNet net(recipe.net, 1);
    train_motion(net, motion_dataset(train, recipe.pair_stride), recipe.sgd, 1);
    std::vector<std::vector<FrameDetections>> dets;
    std::vector<std::vector<MotionMap>> maps;
    for (const auto& s : test) {
      dets.push_back(s.plain_detections());
      maps.push_back(predict_maps(net, s));
    }
    const TrackerConfig cfg;
    const SplitMetrics mm = track_and_evaluate(test, dets, MotionModel::motion_map, cfg, &maps);
    const SplitMetrics kf = track_and_evaluate(test, dets, MotionModel::kalman, cfg);
    const SplitMetrics zero = track_and_evaluate(test, dets, MotionModel::zero, cfg);
    o.note(std::string(name) + ": mmap " + f3(mm.mota) + "/" + f3(mm.idf1) + ", KF " + f3(kf.mota) + "/" + f3(kf.idf1) +
           ", zero " + f3(zero.mota) + "/" + f3(zero.idf1));
    for (const auto* base : {&kf, &zero}) {
      const char* label = base == &kf ? "KF" : "zero";
      o.require(mm.mota - base->mota >= 0.05, std::string(name) + " MOTA gain over " + label + " < 5 points");
      o.require(mm.idf1 - base->idf1 >= 0.05, std::string(name) + " IDF1 gain over " + label + " < 5 points");
    }
  }
  const double secs = seconds_since(t0);
  o.note("train+eval " + f3(secs / 60.0) + " min");
  o.require(secs < 15 * 60.0, "train+eval >= 15 min");
  return o;
}

// ---- 7: branch ablation on held-out motion error -----------------------------------------

Outcome branch_ablation() {
  Outcome o;
  const std::size_t stride = 3;
  const auto train = motion_dataset(generate_split("rotate", 100, 10, 100), stride);
  const auto test = motion_dataset(generate_split("rotate", 900, 5, 100), stride);
  const BlockBranches variants[4] = {BlockBranches::both, BlockBranches::vertical, BlockBranches::horizontal,
                                     BlockBranches::none};
  const char* labels[4] = {"full", "local+V", "local+H", "local"};
  double mean[4] = {};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::string row = "seed " + std::to_string(seed) + ":";
    for (int k = 0; k < 4; ++k) {
      MotionRecipe recipe;
      recipe.net.branches = variants[k];
      recipe.sgd.learning_rate = 2e-2;
      recipe.sgd.epochs = 1;
      MotionNet net(recipe.net, seed);
      // 30 passes, each with a fresh momentum buffer and its own shuffle seed
      for (std::uint64_t e = 0; e < 30; ++e) train_motion(net, train, recipe.sgd, seed * 100 + e);
      const double l1 = evaluate_motion(net, test);
      mean[k] += l1 / 3.0;
      row += std::string(" ") + labels[k] + " " + f3(l1);
    }
    o.note(row);
  }
  o.note("mean: full " + f3(mean[0]) + ", local+V " + f3(mean[1]) + ", local+H " + f3(mean[2]) + ", local " + f3(mean[3]));
  for (int k : {1, 2}) {
    o.require(mean[0] <= mean[k], std::string("full > ") + labels[k]);
    o.require(mean[k] <= mean[3], std::string(labels[k]) + " > local");
  }
  return o;
}

// ---- 8: margin loss on blurred fast objects ------------------------------------------------

Outcome margin_loss_scores() {
  Outcome o;
  ScoreExperimentConfig cfg;
  cfg.evidence = scenario("pan+blur", 1).evidence;
  const auto test = generate_split("pan+blur", 900, 5, 100);
  std::vector<std::vector<MotionMap>> maps;
  for (const auto& s : test) maps.push_back(exact_maps(s));
  const TrackerConfig tracker;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    double bin[2] = {-1, -1};  // MMLoss, CE on [30, 50)
    for (const auto& r : score_head_experiment(cfg, seed))
      if (r.bin.lo == 30.0 && r.bin.hi == 50.0) bin[r.loss == ScoreLoss::mmloss ? 0 : 1] = r.bin.mean_score;
    o.require(bin[0] > 0.5, "seed " + std::to_string(seed) + " MMLoss [30,50) score <= 0.5");
    o.require(bin[0] > bin[1], "seed " + std::to_string(seed) + " MMLoss [30,50) score <= CE");

    // the same heads (same data and seed as the experiment) rescore the test detections
    const auto data = make_score_dataset(cfg.evidence, cfg.train, seed);
    double mota[2] = {};
    for (ScoreLoss loss : {ScoreLoss::mmloss, ScoreLoss::cross_entropy}) {
      const ScoreHead head = train_score_head(data, loss, cfg.training, seed);
      std::vector<std::vector<FrameDetections>> dets;
      for (const auto& s : test) dets.push_back(rescore_detections(s, head));
      mota[loss == ScoreLoss::mmloss ? 0 : 1] =
          track_and_evaluate(test, dets, MotionModel::motion_map, tracker, &maps).mota;
    }
    o.require(mota[0] > mota[1], "seed " + std::to_string(seed) + " MMLoss MOTA <= CE MOTA");
    o.note("seed " + std::to_string(seed) + ": [30,50) score MMLoss " + f3(bin[0]) + " CE " + f3(bin[1]) +
           ", MOTA MMLoss " + f3(mota[0]) + " CE " + f3(mota[1]));
  }
  return o;
}

// ---- 9: CLI determinism ------------------------------------------------------------------------

std::string payload(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line))
    if (line.empty() || line[0] != '#') out << line << '\n';
  return out.str();
}

std::string raw_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Outcome cli_determinism(const std::string& cli) {
  Outcome o;
  if (cli.empty() || !fs::is_regular_file(cli)) {
    o.require(false, "mmtrack binary not found: '" + cli + "'");
    return o;
  }
  const fs::path root = fs::temp_directory_path() / "mmtrack_acceptance_determinism";
  fs::remove_all(root);
  for (const char* run : {"a", "b"}) {
    const fs::path r = root / run;
    const std::string q = "\"" + cli + "\" ";
    const std::vector<std::string> steps{
        q + "simgen --scenario pan --seed 7 --sequences 2 --frames 20 --out " + (r / "data").string(),
        q + "train --data " + (r / "data").string() + " --epochs 2 --seed 7 --out " + (r / "model").string(),
        q + "track --data " + (r / "data").string() + " --motion mmap --checkpoint " +
            (r / "model" / "model.mmck").string() + " --seed 7 --out " + (r / "tracks").string(),
        q + "track --data " + (r / "data").string() + " --motion kalman --seed 7 --out " + (r / "kf").string(),
        q + "eval --data " + (r / "data").string() + " --results " + (r / "tracks").string() + " --seed 7 --out " +
            (r / "eval").string()};
    for (const auto& cmd : steps)
      if (std::system((cmd + " > /dev/null").c_str()) != 0) {
        o.require(false, "command failed: " + cmd);
        return o;
      }
  }
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a"), other = root / "b" / rel;
    if (!fs::exists(other)) {
      o.require(false, "missing in rerun: " + rel.string());
      continue;
    }
    const bool text = e.path().extension() == ".csv" || e.path().extension() == ".txt";
    const bool same = text ? payload(e.path()) == payload(other) : raw_bytes(e.path()) == raw_bytes(other);
    o.require(same, "differs on rerun: " + rel.string());
    ++compared;
  }
  o.require(compared > 0, "no outputs produced");
  o.note(std::to_string(compared) + " files identical across reruns (simgen, train, track, eval)");
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, scan_oracle},         {2, gradient_suite},      {3, margin_suite},
      {4, metric_oracles},      {5, perfect_tracking},    {6, motion_map_tracking},
      {7, branch_ablation},     {8, margin_loss_scores},  {9, [&] { return cli_determinism(cli); }},
  };
  bool all = true;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    all = all && o.pass;
    std::printf("criterion %d: %s (%.1f s) %s\n", id, o.pass ? "PASS" : "FAIL", seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}

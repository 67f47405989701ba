#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "mmtrack/io.hpp"
#include "mmtrack/pipeline.hpp"
#include "svg.hpp"

namespace mmtrack::cli {

namespace fs = std::filesystem;

namespace {

OutputHeader header(const Common& c, const std::string& kind) { return {kind, c.command_line, c.seed}; }

fs::path output_dir(const Common& c) {
  if (c.out.empty()) throw std::runtime_error("--out is required");
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec || !fs::is_directory(c.out)) throw std::runtime_error("cannot create output directory " + c.out);
  return c.out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw std::runtime_error(std::string("missing input: ") + what + " is required");
  if (!fs::is_regular_file(path)) throw std::runtime_error(std::string("missing input: ") + what + " " + path + " does not exist");
}

BlockBranches parse_branches(const std::string& name) {
  if (name == "local") return BlockBranches::none;
  if (name == "local+V") return BlockBranches::vertical;
  if (name == "local+H") return BlockBranches::horizontal;
  if (name == "full") return BlockBranches::both;
  throw std::invalid_argument("unknown branch set '" + name + "' (valid: local, local+V, local+H, full)");
}

std::string branches_name(BlockBranches b) {
  switch (b) {
    case BlockBranches::none: return "local";
    case BlockBranches::vertical: return "local+V";
    case BlockBranches::horizontal: return "local+H";
    case BlockBranches::both: return "full";
  }
  return "full";
}

ScoreLoss parse_loss(const std::string& name) {
  if (name == "CE" || name == "ce") return ScoreLoss::cross_entropy;
  if (name == "MMLoss" || name == "mmloss") return ScoreLoss::mmloss;
  throw std::invalid_argument("unknown loss '" + name + "' (valid: CE, MMLoss)");
}

std::vector<SequenceData> load_dataset(const std::string& root, std::vector<std::string>* names = nullptr) {
  if (root.empty()) throw std::runtime_error("--data is required");
  std::vector<SequenceData> seqs;
  for (const auto& dir : list_sequences(root)) {
    seqs.push_back(read_sequence(dir));
    if (names) names->push_back(dir.filename().string());
  }
  if (seqs.empty()) throw std::runtime_error("empty dataset: no sequences under " + root);
  return seqs;
}

// The network layout travels next to the checkpoint as key=value lines.
void write_model_config(const fs::path& path, const MotionNetConfig& cfg, const OutputHeader& h) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_header(os, h);
  os << "radius = " << cfg.radius << "\nwidth = " << cfg.width << "\nstate = " << cfg.state
     << "\nblocks_per_level = " << cfg.blocks_per_level << "\nfeature_channels = " << cfg.feature_channels
     << "\nappearance_channels = " << cfg.appearance_channels << "\nbranches = " << branches_name(cfg.branches) << "\n";
}

MotionNetConfig read_model_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw std::runtime_error("missing model config " + path.string());
  const auto kv = read_key_values(path);
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error(path.string() + ": missing key " + key);
    return it->second;
  };
  MotionNetConfig cfg;
  cfg.radius = std::stoi(get("radius"));
  cfg.width = std::stoul(get("width"));
  cfg.state = std::stoul(get("state"));
  cfg.blocks_per_level = std::stoul(get("blocks_per_level"));
  cfg.feature_channels = std::stoul(get("feature_channels"));
  cfg.appearance_channels = std::stoul(get("appearance_channels"));
  cfg.branches = parse_branches(get("branches"));
  cfg.validate();
  return cfg;
}

fs::path model_config_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension(".txt");
  return p;
}

EvalRow pooled_row(const std::vector<EvalRow>& rows) {
  EvalRow all;
  all.sequence = "ALL";
  for (const auto& r : rows) {
    all.mota.fp += r.mota.fp;
    all.mota.fn += r.mota.fn;
    all.mota.idsw += r.mota.idsw;
    all.mota.gt_total += r.mota.gt_total;
    all.idf1.idtp += r.idf1.idtp;
    all.idf1.idfp += r.idf1.idfp;
    all.idf1.idfn += r.idf1.idfn;
  }
  const SplitMetrics m = pool_rows(rows);
  all.mota.mota = m.mota;
  all.idf1.idf1 = m.idf1;
  return all;
}

struct ScoreBinRow {
  double lo, hi;
  std::string loss;
  double mean;
};

std::vector<ScoreBinRow> read_score_bins(const std::string& path) {
  std::ifstream is(path);
  std::vector<ScoreBinRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.rfind("velocity_bin_lo", 0) == 0) continue;
    std::stringstream ss(line);
    std::vector<std::string> f;
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 5) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 5 fields");
    rows.push_back({std::stod(f[0]), std::stod(f[1]), f[2], std::stod(f[3])});
  }
  if (rows.empty()) throw std::runtime_error(path + ": no score rows");
  return rows;
}

}  // namespace

void run_simgen(const SimgenOptions& o) {
  if (o.frames < 2) throw std::runtime_error("--frames must be at least 2");
  if (o.sequences == 0) throw std::runtime_error("--sequences must be positive");
  std::map<std::string, std::string> overrides(o.scene_overrides.begin(), o.scene_overrides.end());
  // validate the name and overrides before touching the output directory
  SceneConfig probe = scenario(o.scenario, o.common.seed);
  apply_scene_overrides(probe, overrides);
  probe.validate();
  const fs::path root = output_dir(o.common);
  for (std::size_t i = 0; i < o.sequences; ++i) {
    SceneConfig cfg = scenario(o.scenario, o.common.seed + i);
    apply_scene_overrides(cfg, overrides);
    const SequenceData seq = generate_sequence(cfg, o.frames);
    char name[16];
    std::snprintf(name, sizeof name, "seq%03zu", i);
    write_sequence(root / name, seq, header(o.common, "sequence"));
    std::size_t boxes = 0, dets = 0;
    for (const auto& f : seq.annotations) boxes += f.size();
    for (const auto& f : seq.detections) dets += f.size();
    std::cout << name << ": scenario=" << o.scenario << " seed=" << cfg.seed << " frames=" << seq.frame_count()
              << " gt_boxes=" << boxes << " detections=" << dets << "\n";
  }
}

void run_train(const TrainOptions& o) {
  const auto seqs = load_dataset(o.data);
  MotionRecipe recipe;
  recipe.net.width = o.width;
  recipe.net.state = o.state;
  recipe.net.radius = o.radius;
  recipe.net.branches = parse_branches(o.branches);
  recipe.net.feature_channels = seqs.front().config.feature_channels;
  recipe.sgd.epochs = o.epochs;
  recipe.sgd.learning_rate = o.learning_rate;
  recipe.sgd.batch_size = o.batch_size;
  recipe.sgd.momentum = o.momentum;
  recipe.net.validate();
  recipe.sgd.validate();
  if (o.pair_stride == 0) throw std::runtime_error("--pair-stride must be positive");

  const auto data = motion_dataset(seqs, o.pair_stride);
  if (data.empty()) throw std::runtime_error("empty dataset: no frame pairs under " + o.data);
  const fs::path root = output_dir(o.common);
  MotionNet net(recipe.net, o.common.seed);
  const TrainResult r = train_motion(net, data, recipe.sgd, o.common.seed);

  const auto params = net.parameters();
  save_checkpoint((root / "model.mmck").string(), params);
  write_model_config(root / "model.txt", recipe.net, header(o.common, "model"));
  write_loss_curve(root / "loss.csv", r.epoch_loss, header(o.common, "loss"));
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e)
    std::cout << "epoch " << e + 1 << ": mean L1 " << fmt(r.epoch_loss[e]) << "\n";
  std::cout << "wrote " << (root / "model.mmck").string() << " (" << data.size() << " frame pairs)\n";
}

void run_track(const TrackOptions& o) {
  const MotionModel model = parse_motion_model(o.motion);
  o.tracker.validate();
  std::optional<MotionNet> net;
  if (model == MotionModel::motion_map && !o.exact_maps) {
    if (o.checkpoint.empty()) throw std::runtime_error("missing checkpoint: --motion mmap needs --checkpoint (or --exact-maps)");
    if (!fs::is_regular_file(o.checkpoint)) throw std::runtime_error("missing checkpoint: " + o.checkpoint + " does not exist");
    net.emplace(read_model_config(model_config_path(o.checkpoint)), o.common.seed);
    auto params = net->parameters();
    restore_checkpoint(o.checkpoint, params);
  }
  std::vector<std::string> names;
  const auto seqs = load_dataset(o.data, &names);
  const fs::path root = output_dir(o.common);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    std::vector<MotionMap> maps;
    if (model == MotionModel::motion_map) maps = net ? predict_maps(*net, seqs[i]) : exact_maps(seqs[i]);
    const TrajectorySet tracks =
        track_sequence(seqs[i].plain_detections(), model, o.tracker, model == MotionModel::motion_map ? &maps : nullptr);
    write_results_csv(root / (names[i] + ".csv"), tracks, header(o.common, "results"));
    std::size_t boxes = 0;
    for (const auto& f : tracks.frames) boxes += f.size();
    std::cout << names[i] << ": motion=" << to_string(model) << " frames=" << tracks.frame_count()
              << " track_boxes=" << boxes << "\n";
  }
}

void run_eval(const EvalOptions& o) {
  if (o.data.empty()) throw std::runtime_error("--data is required");
  if (o.results.empty()) throw std::runtime_error("--results is required");
  const auto dirs = list_sequences(o.data);
  if (dirs.empty()) throw std::runtime_error("empty dataset: no sequences under " + o.data);
  std::vector<EvalRow> rows;
  for (const auto& dir : dirs) {
    std::size_t n = 0;
    read_scene_config(dir / "config.txt", &n);
    const std::string name = dir.filename().string();
    const fs::path res = fs::path(o.results) / (name + ".csv");
    if (!fs::is_regular_file(res)) throw std::runtime_error("missing results file " + res.string());
    const TrajectorySet gt = to_trajectories(read_gt_csv(dir / "gt.csv", n));
    rows.push_back(evaluate_tracks(name, gt, read_results_csv(res, n)));
  }
  rows.push_back(pooled_row(rows));
  const fs::path root = output_dir(o.common);
  write_eval_report(root / "eval.csv", rows, header(o.common, "eval"));
  for (const auto& r : rows)
    std::cout << r.sequence << ": MOTA " << fmt(r.mota.mota, 4) << " IDF1 " << fmt(r.idf1.idf1, 4) << " FP " << r.mota.fp
              << " FN " << r.mota.fn << " IDSW " << r.mota.idsw << "\n";
}

void run_ablate(const AblateOptions& o) {
  if (o.motions.empty() || o.losses.empty()) throw std::runtime_error("ablation grid is empty");
  if (o.frames < 2) throw std::runtime_error("--frames must be at least 2");
  o.tracker.validate();
  std::vector<ScoreLoss> losses;
  for (const auto& l : o.losses) losses.push_back(parse_loss(l));
  for (const auto& m : o.motions)
    if (m != "zero" && m != "kalman") parse_branches(m);

  const std::uint64_t seed = o.common.seed;
  const auto train = generate_split(o.scenario, seed, o.train_sequences, o.frames);
  const auto test = generate_split(o.scenario, seed + 10000, o.test_sequences, o.frames);
  const fs::path root = output_dir(o.common);

  // Score heads are fit on evidence drawn from the scenario's detector model;
  // the same heads produce the per-velocity score table.
  ScoreExperimentConfig score_cfg;
  score_cfg.evidence = scenario(o.scenario, seed).evidence;
  const auto score_train = make_score_dataset(score_cfg.evidence, score_cfg.train, seed);
  const auto score_test = make_score_dataset(score_cfg.evidence, score_cfg.test, seed + 7919);
  std::vector<ScoreExperimentRow> score_rows;
  std::vector<std::vector<std::vector<FrameDetections>>> rescored;
  for (ScoreLoss loss : losses) {
    const ScoreHead head = train_score_head(score_train, loss, score_cfg.training, seed);
    for (const auto& bin : score_by_velocity(head, score_test, score_cfg.bin_edges)) score_rows.push_back({loss, bin});
    auto& dets = rescored.emplace_back();
    for (const auto& s : test) dets.push_back(rescore_detections(s, head));
  }
  write_score_experiment(root / "scores.csv", score_rows, header(o.common, "scores"));

  const auto held_out = motion_dataset(test, 1);
  std::ostringstream table;
  write_header(table, header(o.common, "ablation"));
  table << "motion,loss,MOTA,IDF1,FP,FN,IDSW,heldout_L1\n";
  BarChart chart{"Ablation on " + o.scenario, "score", {"MOTA", "IDF1"}, {}};
  for (const auto& m : o.motions) {
    MotionModel model = m == "zero" ? MotionModel::zero : m == "kalman" ? MotionModel::kalman : MotionModel::motion_map;
    std::vector<std::vector<MotionMap>> maps;
    std::string l1 = "-";
    if (model == MotionModel::motion_map) {
      MotionRecipe recipe;
      recipe.net.branches = parse_branches(m);
      recipe.sgd.epochs = o.epochs;
      MotionNet net(recipe.net, seed);
      train_motion(net, motion_dataset(train, o.pair_stride), recipe.sgd, seed);
      l1 = fmt(evaluate_motion(net, held_out));
      for (const auto& s : test) maps.push_back(predict_maps(net, s));
    }
    for (std::size_t k = 0; k < losses.size(); ++k) {
      const SplitMetrics r = track_and_evaluate(test, rescored[k], model, o.tracker, maps.empty() ? nullptr : &maps);
      const EvalRow all = pooled_row(r.rows);
      table << m << "," << to_string(losses[k]) << "," << fmt(r.mota) << "," << fmt(r.idf1) << "," << all.mota.fp << ","
            << all.mota.fn << "," << all.mota.idsw << "," << l1 << "\n";
      chart.groups.push_back({m + "/" + to_string(losses[k]), {r.mota, r.idf1}});
      std::cout << m << " " << to_string(losses[k]) << ": MOTA " << fmt(r.mota, 4) << " IDF1 " << fmt(r.idf1, 4)
                << " heldout L1 " << l1 << "\n";
    }
  }
  write_text(root / "ablation.csv", table.str());
  write_text(root / "ablation.svg", render_bar_chart(chart));
}

void run_plot(const PlotOptions& o) {
  if (o.kind == "margin") {
    if (o.s_values.empty()) throw std::runtime_error("--s needs at least one value");
    if (!(o.x_max > 0)) throw std::runtime_error("--x-max must be positive");
    const fs::path root = output_dir(o.common);
    LineChart chart{"Motion margin", "offset (px/frame)", "margin", {}, std::nullopt, ""};
    std::ostringstream csv;
    write_header(csv, header(o.common, "margin"));
    csv << "x";
    for (double s : o.s_values) {
      MarginConfig cfg;
      cfg.s = s;
      cfg.validate();
      csv << ",s=" << fmt(s, 1);
      chart.series.push_back({"s=" + fmt(s, 1), {}, {}});
    }
    csv << "\n";
    const int steps = 100;
    for (int k = 0; k <= steps; ++k) {
      const double x = o.x_max * k / steps;
      csv << fmt(x, 2);
      for (std::size_t i = 0; i < o.s_values.size(); ++i) {
        MarginConfig cfg;
        cfg.s = o.s_values[i];
        const double d = motion_margin(x, cfg);
        csv << "," << fmt(d);
        chart.series[i].x.push_back(x);
        chart.series[i].y.push_back(d);
      }
      csv << "\n";
    }
    write_text(root / "margin.csv", csv.str());
    write_text(root / "margin.svg", render_line_chart(chart));
  } else if (o.kind == "scores") {
    require_file(o.input, "score table");
    const auto rows = read_score_bins(o.input);
    const fs::path root = output_dir(o.common);
    LineChart chart{"Detection score by velocity", "velocity (px/frame)", "mean score", {}, 0.5, "0.5"};
    std::ostringstream csv;
    write_header(csv, header(o.common, "score_velocity"));
    csv << "loss_name,velocity_mid,mean_score\n";
    for (const auto& r : rows) {
      auto it = std::find_if(chart.series.begin(), chart.series.end(), [&](const Series& s) { return s.label == r.loss; });
      if (it == chart.series.end()) it = chart.series.insert(chart.series.end(), Series{r.loss, {}, {}});
      const double mid = 0.5 * (r.lo + r.hi);
      it->x.push_back(mid);
      it->y.push_back(r.mean);
      csv << r.loss << "," << fmt(mid, 2) << "," << fmt(r.mean) << "\n";
    }
    write_text(root / "score_velocity.csv", csv.str());
    write_text(root / "score_velocity.svg", render_line_chart(chart));
  } else if (o.kind == "loss") {
    require_file(o.input, "loss curve");
    const auto loss = read_loss_curve(o.input);
    if (loss.empty()) throw std::runtime_error(o.input + ": no loss rows");
    const fs::path root = output_dir(o.common);
    Series s{"train L1", {}, loss};
    for (std::size_t e = 0; e < loss.size(); ++e) s.x.push_back(static_cast<double>(e + 1));
    write_text(root / "loss.svg", render_line_chart({"Training loss", "epoch", "mean L1", {s}, std::nullopt, ""}));
  } else {
    throw std::runtime_error("unknown plot kind '" + o.kind + "' (valid: margin, scores, loss)");
  }
}

}  // namespace mmtrack::cli

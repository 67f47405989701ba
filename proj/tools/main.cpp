// mmtrack: simulate, train, track, evaluate and plot from one binary.

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "commands.hpp"
#include "mmtrack/io.hpp"

using namespace mmtrack::cli;

namespace {

void add_common(CLI::App* sub, Common& c, const char* out_help) {
  sub->add_option("--seed", c.seed, "random seed, recorded in every output header")->capture_default_str();
  sub->add_option("--out", c.out, out_help);
  sub->add_option("--config", c.config, "key = value file; command-line flags win");
}

void add_tracker_flags(CLI::App* sub, mmtrack::TrackerConfig& t) {
  sub->add_option("--score-high", t.score_high, "stage-1 score threshold")->capture_default_str();
  sub->add_option("--score-low", t.score_low, "stage-2 score threshold")->capture_default_str();
  sub->add_option("--iou-gate", t.iou_gate, "minimum IoU for a match")->capture_default_str();
  sub->add_option("--max-age", t.max_age, "frames a lost track survives")->capture_default_str();
  sub->add_option("--min-hits", t.min_hits, "hits before a track is reported")->capture_default_str();
  sub->add_option("--predict-while-lost", t.predict_while_lost, "keep moving lost tracks with the motion map")
      ->capture_default_str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Feeds config-file values into options that were not given on the command
// line. Keys may use '_' or '-'. Unknown keys go to `extras` when the command
// accepts them, otherwise they are an error.
void merge_config(CLI::App* sub, const std::string& path,
                  std::vector<std::pair<std::string, std::string>>* extras) {
  for (const auto& [key, value] : mmtrack::read_key_values(path)) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = name == "config" ? nullptr : sub->get_option_no_throw("--" + name);
    if (opt == nullptr) {
      if (extras == nullptr) throw std::runtime_error(path + ": unknown key '" + key + "' for " + sub->get_name());
      extras->emplace_back(key, value);
      continue;
    }
    if (opt->count() > 0) continue;
    if (opt->get_items_expected_max() > 1)
      for (const auto& item : split(value, ',')) opt->add_result(item);
    else
      opt->add_result(value);
    opt->run_callback();
  }
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-map multi-object tracking toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mmtrack format " + std::to_string(mmtrack::kFormatVersion));

  std::string command_line = "mmtrack";
  for (int i = 1; i < argc; ++i) command_line += std::string(" ") + argv[i];

  SimgenOptions simgen;
  auto* c_simgen = app.add_subcommand("simgen", "generate a simulated dataset");
  add_common(c_simgen, simgen.common, "dataset root (one seqNNN directory per sequence)");
  c_simgen->add_option("--scenario", simgen.scenario, "still, pan, rotate or pan+blur")->capture_default_str();
  c_simgen->add_option("--sequences", simgen.sequences, "number of sequences (seeds seed, seed+1, ...)")
      ->capture_default_str();
  c_simgen->add_option("--frames", simgen.frames, "frames per sequence")->capture_default_str();

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "train the motion network on a dataset");
  add_common(c_train, train.common, "directory for model.mmck, model.txt and loss.csv");
  c_train->add_option("--data", train.data, "dataset root written by simgen");
  c_train->add_option("--epochs", train.epochs, "passes over the frame pairs")->capture_default_str();
  c_train->add_option("--lr", train.learning_rate, "SGD learning rate")->capture_default_str();
  c_train->add_option("--batch-size", train.batch_size, "frame pairs per update")->capture_default_str();
  c_train->add_option("--momentum", train.momentum, "heavy-ball momentum, 0 for plain SGD")->capture_default_str();
  c_train->add_option("--width", train.width, "SSM channel width")->capture_default_str();
  c_train->add_option("--state", train.state, "SSM state size")->capture_default_str();
  c_train->add_option("--radius", train.radius, "correlation radius")->capture_default_str();
  c_train->add_option("--branches", train.branches, "local, local+V, local+H or full")->capture_default_str();
  c_train->add_option("--pair-stride", train.pair_stride, "use every k-th frame pair")->capture_default_str();

  TrackOptions track;
  auto* c_track = app.add_subcommand("track", "run the tracker over a dataset");
  add_common(c_track, track.common, "directory for one results CSV per sequence");
  c_track->add_option("--data", track.data, "dataset root written by simgen");
  c_track->add_option("--motion", track.motion, "mmap, kalman or zero")->capture_default_str();
  c_track->add_option("--checkpoint", track.checkpoint, "model.mmck written by train (mmap only)");
  c_track->add_flag("--exact-maps", track.exact_maps, "mmap with maps from the stored flow and ground truth");
  add_tracker_flags(c_track, track.tracker);

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "score tracker output against ground truth");
  add_common(c_eval, eval.common, "directory for eval.csv");
  c_eval->add_option("--data", eval.data, "dataset root with gt.csv files");
  c_eval->add_option("--results", eval.results, "directory of results CSVs named after the sequences");

  AblateOptions ablate;
  auto* c_ablate = app.add_subcommand("ablate", "motion source x score loss ablation");
  add_common(c_ablate, ablate.common, "directory for ablation.csv, ablation.svg and scores.csv");
  c_ablate->add_option("--scenario", ablate.scenario, "still, pan, rotate or pan+blur")->capture_default_str();
  c_ablate->add_option("--train-sequences", ablate.train_sequences, "training sequences (seeds seed, seed+1, ...)")->capture_default_str();
  c_ablate->add_option("--test-sequences", ablate.test_sequences, "test sequences (seeds seed+10000, ...)")->capture_default_str();
  c_ablate->add_option("--frames", ablate.frames, "frames per sequence")->capture_default_str();
  c_ablate->add_option("--epochs", ablate.epochs, "motion-network training epochs")->capture_default_str();
  c_ablate->add_option("--pair-stride", ablate.pair_stride, "use every k-th frame pair")->capture_default_str();
  c_ablate->add_option("--motions", ablate.motions, "zero, kalman, local, local+V, local+H, full")
      ->delimiter(',')
      ->capture_default_str();
  c_ablate->add_option("--losses", ablate.losses, "CE, MMLoss")->delimiter(',')->capture_default_str();
  add_tracker_flags(c_ablate, ablate.tracker);

  PlotOptions plot;
  auto* c_plot = app.add_subcommand("plot", "render figures as CSV + SVG");
  add_common(c_plot, plot.common, "directory for the figure files");
  c_plot->add_option("--kind", plot.kind, "margin, scores or loss")->capture_default_str();
  c_plot->add_option("--input", plot.input, "scores.csv from ablate, or loss.csv from train");
  c_plot->add_option("--s", plot.s_values, "margin scales")->delimiter(',')->capture_default_str();
  c_plot->add_option("--x-max", plot.x_max, "margin curve extent")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    for (Common* c : {&simgen.common, &train.common, &track.common, &eval.common, &ablate.common, &plot.common})
      c->command_line = command_line;
    const auto with_config = [](CLI::App* sub, const Common& c, auto* extras) {
      if (!c.config.empty()) {
        if (!std::filesystem::is_regular_file(c.config)) throw std::runtime_error("missing config file " + c.config);
        merge_config(sub, c.config, extras);
      }
    };
    std::vector<std::pair<std::string, std::string>>* none = nullptr;
    if (c_simgen->parsed()) {
      with_config(c_simgen, simgen.common, &simgen.scene_overrides);
      run_simgen(simgen);
    } else if (c_train->parsed()) {
      with_config(c_train, train.common, none);
      run_train(train);
    } else if (c_track->parsed()) {
      with_config(c_track, track.common, none);
      run_track(track);
    } else if (c_eval->parsed()) {
      with_config(c_eval, eval.common, none);
      run_eval(eval);
    } else if (c_ablate->parsed()) {
      with_config(c_ablate, ablate.common, none);
      run_ablate(ablate);
    } else if (c_plot->parsed()) {
      with_config(c_plot, plot.common, none);
      run_plot(plot);
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

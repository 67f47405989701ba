#pragma once

// Motion-margin classification loss.
//
//   D(x) = s * sigmoid((x - pivot) / s) - M,   M = s * sigmoid(-pivot / s)
//   loss = -y log sigmoid(yhat - D) - (1 - y) log(1 - sigmoid(yhat))
//
// The margin only shifts positives; negatives use the plain logit.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmtrack/blur.hpp"
#include "mmtrack/tensor.hpp"

namespace mmtrack {

struct MarginConfig {
  double s = 10.0;
  double pivot = 5.0;

  void validate() const;
  double offset() const;       // M
  double supremum() const;     // s - M, the limit of D as x grows
};

double motion_margin(double offset_px, const MarginConfig& cfg = {});

struct ClassificationSample {
  double logit = 0.0;
  int label = 0;
  double offset = 0.0;  // pixels per frame
};

// Scalar evaluation of the loss; margins are taken per sample.
double mm_loss(std::span<const ClassificationSample> samples, const MarginConfig& cfg = {});
// Same loss with explicitly supplied margins (one per sample).
double mm_loss_with_margins(std::span<const double> logits, std::span<const int> labels,
                            std::span<const double> margins);

// Differentiable form: logits (n) tensor, labels and margins fixed.
Tensor mm_loss(const Tensor& logits, std::span<const int> labels, std::span<const double> margins);

// Binary cross-entropy on logits, the zero-margin reference.
double binary_cross_entropy(std::span<const double> logits, std::span<const int> labels);

// ---- score-head experiment ------------------------------------------------
// Positives carry blur-degraded evidence whose strength falls with apparent
// speed; negatives are clutter. A small classifier is trained on the same
// data under each loss and mean scores are reported per velocity bin.

enum class ScoreLoss { mmloss, cross_entropy };
std::string to_string(ScoreLoss loss);

struct ScoreSample {
  Evidence evidence;
  int label = 0;
  double speed = 0.0;
};

struct ScoreDatasetConfig {
  std::size_t positives = 4000;
  std::size_t negatives = 4000;
  double max_speed = 50.0;
  // Fraction of positives drawn uniformly over [0, max_speed); the rest are
  // exponential with mean `slow_mean`, giving a long-tailed speed mix.
  double uniform_fraction = 0.1;
  double slow_mean = 5.0;
};

std::vector<ScoreSample> make_score_dataset(const EvidenceModel& model,
                                            const ScoreDatasetConfig& cfg, std::uint64_t seed);

// Logistic head on a fixed polynomial expansion of the evidence.
class ScoreHead {
 public:
  explicit ScoreHead(std::uint64_t seed);
  static std::vector<double> expand(const Evidence& e);
  Tensor logits(const std::vector<ScoreSample>& batch) const;
  double score(const Evidence& e) const;
  std::vector<NamedTensor> parameters() const;

 private:
  Tensor weight_;  // (F, 1)
  Tensor bias_;    // (1)
};

struct ScoreTrainConfig {
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 0.5;
  MarginConfig margin;
};

ScoreHead train_score_head(const std::vector<ScoreSample>& data, ScoreLoss loss,
                           const ScoreTrainConfig& cfg, std::uint64_t seed);

struct VelocityBin {
  double lo = 0.0;
  double hi = 0.0;
  double mean_score = 0.0;
  std::size_t count = 0;
};

struct ScoreExperimentRow {
  ScoreLoss loss;
  VelocityBin bin;
};

// Mean predicted score of positives per bin; empty bins are omitted.
std::vector<VelocityBin> score_by_velocity(const ScoreHead& head,
                                           const std::vector<ScoreSample>& data,
                                           std::span<const double> edges);

struct ScoreExperimentConfig {
  EvidenceModel evidence;
  ScoreDatasetConfig train;
  ScoreDatasetConfig test;
  ScoreTrainConfig training;
  std::vector<double> bin_edges{0, 5, 10, 20, 30, 50};
};

std::vector<ScoreExperimentRow> score_head_experiment(const ScoreExperimentConfig& cfg,
                                                      std::uint64_t seed);

}  // namespace mmtrack

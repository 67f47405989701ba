#include "mmtrack/mmloss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mmtrack {

void MarginConfig::validate() const {
  if (!(s > 0.0)) throw std::invalid_argument("margin: s must be > 0");
}

double MarginConfig::offset() const { return s * sigmoid_value((0.0 - pivot) / s); }

double MarginConfig::supremum() const { return s - offset(); }

double motion_margin(double offset_px, const MarginConfig& cfg) {
  cfg.validate();
  if (offset_px < 0.0 || !std::isfinite(offset_px))
    throw std::invalid_argument("motion_margin: offset must be a finite magnitude >= 0");
  return cfg.s * sigmoid_value((offset_px - cfg.pivot) / cfg.s) - cfg.offset();
}

namespace {

void check_label(int y) {
  if (y != 0 && y != 1) throw std::invalid_argument("mm_loss: label " + std::to_string(y) + " outside {0,1}");
}

// -y log sigmoid(z - D) - (1 - y) log(1 - sigmoid(z))
double sample_loss(double logit, int label, double margin) {
  return label == 1 ? softplus_value(margin - logit) : softplus_value(logit);
}

}  // namespace

double mm_loss_with_margins(std::span<const double> logits, std::span<const int> labels,
                            std::span<const double> margins) {
  if (logits.size() != labels.size() || logits.size() != margins.size())
    throw std::invalid_argument("mm_loss: logits, labels and margins differ in length");
  if (logits.empty()) throw std::invalid_argument("mm_loss: no samples");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    check_label(labels[i]);
    total += sample_loss(logits[i], labels[i], margins[i]);
  }
  return total / static_cast<double>(logits.size());
}

double mm_loss(std::span<const ClassificationSample> samples, const MarginConfig& cfg) {
  std::vector<double> logits, margins;
  std::vector<int> labels;
  for (const auto& s : samples) {
    check_label(s.label);
    logits.push_back(s.logit);
    labels.push_back(s.label);
    margins.push_back(motion_margin(s.offset, cfg));
  }
  return mm_loss_with_margins(logits, labels, margins);
}

double binary_cross_entropy(std::span<const double> logits, std::span<const int> labels) {
  if (logits.size() != labels.size() || logits.empty())
    throw std::invalid_argument("binary_cross_entropy: bad input sizes");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    check_label(labels[i]);
    const double p = sigmoid_value(logits[i]);
    total += labels[i] == 1 ? -std::log(p) : -std::log1p(-p);
  }
  return total / static_cast<double>(logits.size());
}

Tensor mm_loss(const Tensor& logits, std::span<const int> labels, std::span<const double> margins) {
  const std::size_t n = logits.numel();
  if (labels.size() != n || margins.size() != n)
    throw std::invalid_argument("mm_loss: logits, labels and margins differ in length");
  if (n == 0) throw std::invalid_argument("mm_loss: no samples");
  std::vector<double> pos(n), negm(n);
  for (std::size_t i = 0; i < n; ++i) {
    check_label(labels[i]);
    pos[i] = labels[i];
    negm[i] = 1.0 - labels[i];
  }
  const Shape shape = logits.shape();
  Tensor y = Tensor::from(shape, pos);
  Tensor not_y = Tensor::from(shape, negm);
  Tensor d = Tensor::from(shape, std::vector<double>(margins.begin(), margins.end()));
  Tensor positive_term = mul(y, softplus(sub(d, logits)));
  Tensor negative_term = mul(not_y, softplus(logits));
  return mean(add(positive_term, negative_term));
}

// ---- score-head experiment ------------------------------------------------

std::string to_string(ScoreLoss loss) {
  return loss == ScoreLoss::mmloss ? "MMLoss" : "CE";
}

std::vector<ScoreSample> make_score_dataset(const EvidenceModel& model,
                                            const ScoreDatasetConfig& cfg, std::uint64_t seed) {
  model.blur.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> slow(1.0 / cfg.slow_mean);
  std::vector<ScoreSample> out;
  out.reserve(cfg.positives + cfg.negatives);
  for (std::size_t i = 0; i < cfg.positives; ++i) {
    double v = unit(rng) < cfg.uniform_fraction ? unit(rng) * cfg.max_speed : slow(rng);
    v = std::min(v, cfg.max_speed * (1.0 - 1e-9));
    out.push_back({positive_evidence(v, model, rng), 1, v});
  }
  for (std::size_t i = 0; i < cfg.negatives; ++i) out.push_back({negative_evidence(model, rng), 0, 0.0});
  return out;
}

ScoreHead::ScoreHead(std::uint64_t seed) {
  const std::size_t f = expand(Evidence{}).size();
  weight_ = init_uniform("score.w", {f, 1}, f, seed);
  bias_ = Tensor::zeros({1}, true);
}

std::vector<double> ScoreHead::expand(const Evidence& e) {
  const double s = e.strength, k = e.streak, c = e.contrast;
  return {s, k, c, s * k, s * s, k * k, s * c, k * c, c * c};
}

Tensor ScoreHead::logits(const std::vector<ScoreSample>& batch) const {
  const std::size_t f = weight_.dim(0);
  std::vector<double> x;
  x.reserve(batch.size() * f);
  for (const auto& s : batch) {
    const auto row = expand(s.evidence);
    x.insert(x.end(), row.begin(), row.end());
  }
  Tensor features = Tensor::from({batch.size(), f}, std::move(x));
  return add(reshape(matmul(features, weight_), {batch.size()}), bias_);
}

double ScoreHead::score(const Evidence& e) const {
  const auto row = expand(e);
  double z = bias_[0];
  for (std::size_t i = 0; i < row.size(); ++i) z += row[i] * weight_[i];
  return sigmoid_value(z);
}

std::vector<NamedTensor> ScoreHead::parameters() const {
  return {{"score.w", weight_}, {"score.b", bias_}};
}

ScoreHead train_score_head(const std::vector<ScoreSample>& data, ScoreLoss loss,
                           const ScoreTrainConfig& cfg, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("train_score_head: empty dataset");
  cfg.margin.validate();
  ScoreHead head(seed);
  auto params = head.parameters();
  SgdConfig sgd;
  sgd.learning_rate = cfg.learning_rate;
  sgd.batch_size = cfg.batch_size;
  sgd.epochs = cfg.epochs;
  sgd.momentum = 0.9;
  SgdOptimizer optimizer(sgd);
  std::mt19937_64 rng(seed ^ 0x5C0DEULL);
  std::vector<std::size_t> order(data.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<ScoreSample> batch;
      std::vector<int> labels;
      std::vector<double> margins;
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = data[order[k]];
        batch.push_back(s);
        labels.push_back(s.label);
        margins.push_back(loss == ScoreLoss::mmloss && s.label == 1 ? motion_margin(s.speed, cfg.margin) : 0.0);
      }
      Tape tape;
      TapeScope scope(tape);
      Tensor l = mm_loss(head.logits(batch), labels, margins);
      tape.backward(l);
      optimizer.step(params);
    }
  }
  return head;
}

std::vector<VelocityBin> score_by_velocity(const ScoreHead& head,
                                           const std::vector<ScoreSample>& data,
                                           std::span<const double> edges) {
  std::vector<VelocityBin> bins;
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    VelocityBin bin{edges[b], edges[b + 1], 0.0, 0};
    for (const auto& s : data) {
      if (s.label != 1 || s.speed < bin.lo || s.speed >= bin.hi) continue;
      bin.mean_score += head.score(s.evidence);
      ++bin.count;
    }
    if (bin.count == 0) continue;
    bin.mean_score /= static_cast<double>(bin.count);
    bins.push_back(bin);
  }
  return bins;
}

std::vector<ScoreExperimentRow> score_head_experiment(const ScoreExperimentConfig& cfg,
                                                      std::uint64_t seed) {
  const auto train = make_score_dataset(cfg.evidence, cfg.train, seed);
  const auto test = make_score_dataset(cfg.evidence, cfg.test, seed + 7919);
  std::vector<ScoreExperimentRow> rows;
  for (ScoreLoss loss : {ScoreLoss::mmloss, ScoreLoss::cross_entropy}) {
    const ScoreHead head = train_score_head(train, loss, cfg.training, seed);
    for (const auto& bin : score_by_velocity(head, test, cfg.bin_edges)) rows.push_back({loss, bin});
  }
  return rows;
}

}  // namespace mmtrack

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mmtrack/blur.hpp"
#include "mmtrack/mmloss.hpp"

using namespace mmtrack;

namespace {

MarginConfig with_s(double s) {
  MarginConfig cfg;
  cfg.s = s;
  return cfg;
}

double bin_score(const std::vector<ScoreExperimentRow>& rows, ScoreLoss loss, double lo) {
  for (const auto& r : rows)
    if (r.loss == loss && r.bin.lo == lo) return r.bin.mean_score;
  return NAN;
}

}  // namespace

TEST(Margin, ZeroAtRestForEveryScale) {
  for (double s : {1.0, 5.0, 10.0, 20.0, 0.3}) EXPECT_LT(std::abs(motion_margin(0.0, with_s(s))), 1e-12) << s;
}

TEST(Margin, ReferenceValues) {
  EXPECT_NEAR(motion_margin(30.0), 5.4660115, 1e-6);
  EXPECT_NEAR(motion_margin(5.0), 1.2245933, 1e-6);
  EXPECT_NEAR(MarginConfig{}.supremum(), 6.2245933, 1e-6);
}

TEST(Margin, StrictlyIncreasingAndBoundedBySupremum) {
  // s = 1 saturates to the same double beyond x ~ 37, so it is left out here
  for (double s : {5.0, 10.0, 20.0}) {
    const MarginConfig cfg = with_s(s);
    double prev = motion_margin(0.0, cfg);
    for (int x = 1; x <= 100; ++x) {
      const double d = motion_margin(x, cfg);
      EXPECT_GT(d, prev) << "s=" << s << " x=" << x;
      EXPECT_LT(d, cfg.supremum());
      prev = d;
    }
  }
  EXPECT_GE(motion_margin(30.0), 0.85 * MarginConfig{}.supremum());
}

TEST(Margin, RejectsBadInput) {
  EXPECT_THROW(motion_margin(-1.0), std::invalid_argument);
  EXPECT_THROW(motion_margin(NAN), std::invalid_argument);
  EXPECT_THROW(motion_margin(1.0, with_s(0.0)), std::invalid_argument);
}

TEST(MmLoss, SpecCases) {
  const std::vector<double> zero{0.0};
  const std::vector<int> pos{1}, neg{0};
  EXPECT_NEAR(mm_loss_with_margins(zero, pos, std::vector<double>{0.0}), std::log(2.0), 1e-12);
  EXPECT_NEAR(mm_loss_with_margins(zero, neg, std::vector<double>{4.0}), std::log(2.0), 1e-12);
  EXPECT_NEAR(mm_loss_with_margins(std::vector<double>{2.0}, pos, std::vector<double>{5.4660115}), 3.4972, 1e-3);
}

TEST(MmLoss, ZeroMarginsEqualCrossEntropy) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-8, 8);
  std::vector<double> logits(64), margins(64, 0.0);
  std::vector<int> labels(64);
  for (std::size_t i = 0; i < 64; ++i) {
    logits[i] = u(rng);
    labels[i] = static_cast<int>(i % 3 == 0);
  }
  EXPECT_NEAR(mm_loss_with_margins(logits, labels, margins), binary_cross_entropy(logits, labels), 1e-12);
  const Tensor t = mm_loss(Tensor::from({64}, logits), labels, margins);
  EXPECT_NEAR(t.item(), binary_cross_entropy(logits, labels), 1e-12);
}

TEST(MmLoss, SampleFormUsesOffsetsOnPositivesOnly) {
  const std::vector<ClassificationSample> s{{1.0, 1, 30.0}, {-0.5, 0, 30.0}};
  const double want = mm_loss_with_margins(std::vector<double>{1.0, -0.5}, std::vector<int>{1, 0},
                                           std::vector<double>{motion_margin(30.0), 0.0});
  EXPECT_NEAR(mm_loss(s), want, 1e-14);
}

TEST(MmLoss, StableForExtremeLogits) {
  const double l = mm_loss_with_margins(std::vector<double>{-800.0, 800.0}, std::vector<int>{1, 0},
                                        std::vector<double>{0.0, 0.0});
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 800.0, 1e-9);
}

TEST(MmLoss, RejectsBadLabelsAndLengths) {
  EXPECT_THROW(mm_loss_with_margins(std::vector<double>{0.0}, std::vector<int>{2}, std::vector<double>{0.0}),
               std::invalid_argument);
  EXPECT_THROW(mm_loss_with_margins(std::vector<double>{0.0, 1.0}, std::vector<int>{1}, std::vector<double>{0.0}),
               std::invalid_argument);
}

TEST(Blur, MeanScoreModel) {
  const BlurModel b;
  EXPECT_DOUBLE_EQ(b.mean_score(0.0), 0.95);
  EXPECT_NEAR(b.mean_score(40.0), 0.40, 1e-12);
  EXPECT_NEAR(b.mean_score(1000.0), 0.40, 1e-12);
  BlurModel quiet;
  quiet.score_noise = 0.0;
  std::mt19937_64 rng(1);
  EXPECT_NEAR(quiet.sample_score(40.0, rng), 0.40, 1e-12);
}

TEST(ScoreExperiment, SlowObjectsEasyAndFastObjectsFavorMargin) {
  ScoreExperimentConfig cfg;
  const auto rows = score_head_experiment(cfg, 1);
  for (auto loss : {ScoreLoss::mmloss, ScoreLoss::cross_entropy})
    EXPECT_GT(bin_score(rows, loss, 0.0), 0.8) << to_string(loss);
  const double mm = bin_score(rows, ScoreLoss::mmloss, 30.0), ce = bin_score(rows, ScoreLoss::cross_entropy, 30.0);
  EXPECT_GT(mm, 0.5);
  EXPECT_GT(mm, ce);
}

TEST(ScoreExperiment, DeterministicPerSeed) {
  ScoreExperimentConfig cfg;
  cfg.train.positives = cfg.train.negatives = 400;
  cfg.test.positives = cfg.test.negatives = 400;
  cfg.training.epochs = 3;
  const auto a = score_head_experiment(cfg, 7), b = score_head_experiment(cfg, 7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].bin.mean_score, b[i].bin.mean_score);
}

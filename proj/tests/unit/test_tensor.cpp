#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "../support/grad_cases.hpp"
#include "../support/random.hpp"
#include "mmtrack/tensor.hpp"

using namespace mmtrack;
using mmtrack::testing::random_tensor;

TEST(TensorOps, AddIsElementwise) {
  const Tensor r = add(Tensor::from({2}, {1, 2}), Tensor::from({2}, {3, 4}));
  EXPECT_EQ(r[0], 4.0);
  EXPECT_EQ(r[1], 6.0);
}

TEST(TensorOps, SigmoidAtZeroIsHalf) { EXPECT_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5); }

TEST(TensorOps, AllOnesThreeByThreeConvCenterSumsNine) {
  const Tensor out = conv2d(Tensor::full({1, 3, 3}, 1.0), Tensor::full({1, 1, 3, 3}, 1.0));
  EXPECT_EQ(out[4], 9.0);
  EXPECT_EQ(out[0], 4.0);  // corner sees a 2x2 patch under zero padding
}

TEST(TensorOps, ShapeMismatchNamesBothShapes) {
  try {
    add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2}));
    FAIL() << "expected a throw";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3,2]"), std::string::npos) << msg;
  }
}

TEST(TensorOps, NonFiniteInputRejected) {
  EXPECT_THROW(exp(Tensor::from({2}, {1.0, NAN})), std::invalid_argument);
  EXPECT_THROW(sigmoid(Tensor::from({1}, {INFINITY})), std::invalid_argument);
}

TEST(TensorOps, ScalarBroadcastOnly) {
  const Tensor r = mul(Tensor::from({3}, {1, 2, 3}), Tensor::scalar(2.0));
  EXPECT_EQ(r[2], 6.0);
  EXPECT_THROW(mul(Tensor::zeros({2, 3}), Tensor::zeros({3})), std::invalid_argument);
}

TEST(TensorOps, UpsampleOfConstantIsConstant) {
  const Tensor up = upsample2x(Tensor::full({2, 3, 5}, 1.75));
  ASSERT_EQ(up.shape(), (Shape{2, 6, 10}));
  for (double v : up.data()) EXPECT_DOUBLE_EQ(v, 1.75);
}

TEST(TensorOps, DiracKernelReproducesInput) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({3, 4, 5}, rng, -1, 1, false);
  Tensor w = Tensor::zeros({3, 3, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) w.mutable_data()[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0;
  const Tensor y = conv2d(x, w);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(TensorOps, LogRejectsNonPositive) { EXPECT_THROW(log(Tensor::from({2}, {1.0, 0.0})), std::invalid_argument); }

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::from({3}, {0.5, -1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  tape.backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareGivesTwiceInput) {
  Tensor x = Tensor::from({1}, {2.0}, true);
  Tape tape;
  TapeScope scope(tape);
  tape.backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad()[0], 4.0);
}

TEST(Backward, NonScalarLossRejected) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = exp(x);
  EXPECT_THROW(tape.backward(y), std::invalid_argument);
}

TEST(Backward, MeanSigmoidMatmulMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  Tensor w = random_tensor({3, 4}, rng), x = random_tensor({4, 2}, rng);
  const auto report = grad_check_params([&] { return mean(sigmoid(matmul(w, x))); }, {w, x}, 1e-5, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_error;
}

TEST(Tape, ReplayIsBitwiseIdentical) {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor({2, 4, 4}, rng), w = random_tensor({3, 2, 3, 3}, rng);
  Tape tape;
  TapeScope scope(tape);
  Tensor loss = mean(softplus(upsample2x(conv2d(a, w))));
  EXPECT_GT(tape.size(), 3u);
  EXPECT_TRUE(tape.replay_matches());
  for (std::size_t i = 1; i < tape.size(); ++i)
    for (const auto& in : tape.entry(i).inputs) {
      if (in.is_leaf()) continue;
      bool earlier = false;
      for (std::size_t j = 0; j < i; ++j) earlier |= tape.entry(j).output.same(in);
      EXPECT_TRUE(earlier) << "entry " << i << " uses a later result";
    }
}

TEST(GradCheck, SumIsExact) {
  std::mt19937_64 rng(2);
  const auto report = grad_check([](const Tensor& x) { return sum(x); }, random_tensor({5}, rng), 1e-5, 1e-12);
  EXPECT_LT(report.max_error, 1e-9);
}

TEST(GradCheck, ZeroStepRejected) {
  EXPECT_THROW(grad_check([](const Tensor& x) { return sum(x); }, Tensor::zeros({2}), 0.0, 1e-4),
               std::invalid_argument);
}

TEST(GradCheck, EveryCatalogOpPasses) {
  for (const auto& c : mmtrack::testing::tensor_grad_cases())
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto r = c.run(seed, 1e-5, 1e-4);
      EXPECT_TRUE(r.passed) << c.name << " seed " << seed << " err " << r.max_error;
    }
}

TEST(Sgd, UpdateRule) {
  Tensor p = Tensor::from({1}, {1.0}, true);
  std::vector<NamedTensor> params{{"p", p}};
  SgdConfig cfg;
  cfg.learning_rate = 0.1;
  p.grad_buffer()[0] = 2.0;
  sgd_step(params, cfg);
  EXPECT_DOUBLE_EQ(p[0], 0.8);
  EXPECT_FALSE(p.has_grad());
}

TEST(Sgd, ZeroGradientIsFixedPoint) {
  Tensor p = Tensor::from({1}, {1.5}, true);
  std::vector<NamedTensor> params{{"p", p}};
  p.grad_buffer()[0] = 0.0;
  sgd_step(params, SgdConfig{});
  EXPECT_EQ(p[0], 1.5);
}

TEST(Sgd, TwoStepsAreLinear) {
  Tensor p = Tensor::from({1}, {1.0}, true);
  std::vector<NamedTensor> params{{"p", p}};
  SgdConfig cfg;
  cfg.learning_rate = 0.05;
  for (int i = 0; i < 2; ++i) {
    p.grad_buffer()[0] = 3.0;
    sgd_step(params, cfg);
  }
  EXPECT_DOUBLE_EQ(p[0], 1.0 - 2 * 0.05 * 3.0);
}

TEST(Sgd, MissingGradientNamesParameter) {
  std::vector<NamedTensor> params{{"head.w", Tensor::zeros({2}, true)}};
  try {
    sgd_step(params, SgdConfig{});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("head.w"), std::string::npos);
  }
}

TEST(Sgd, DefaultsAndValidation) {
  const SgdConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.learning_rate, 1e-4);
  EXPECT_EQ(cfg.batch_size, 8);
  EXPECT_EQ(cfg.epochs, 10);
  SgdConfig bad;
  bad.learning_rate = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = SgdConfig{};
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Init, UniformWithinFanInBoundAndNameKeyed) {
  const Tensor a = init_uniform("x.w", {16, 4}, 16, 7);
  const Tensor b = init_uniform("x.w", {16, 4}, 16, 7);
  const Tensor c = init_uniform("y.w", {16, 4}, 16, 7);
  for (double v : a.data()) EXPECT_LE(std::abs(v), 0.25);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  EXPECT_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

TEST(Checkpoint, RoundTripAndRestore) {
  const auto path = (std::filesystem::temp_directory_path() / "mmtrack_ckpt_test.bin").string();
  std::vector<NamedTensor> params{{"a", Tensor::from({2, 2}, {1.5, -2, 0.25, 4}, true)},
                                  {"b", Tensor::from({1}, {3}, true)}};
  save_checkpoint(path, params);
  const auto loaded = load_checkpoint(path);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].name, "a");
  EXPECT_EQ(loaded[0].tensor.shape(), (Shape{2, 2}));
  EXPECT_EQ(loaded[0].tensor[1], -2.0);

  std::vector<NamedTensor> target{{"b", Tensor::zeros({1}, true)}, {"a", Tensor::zeros({2, 2}, true)}};
  restore_checkpoint(path, target);
  EXPECT_EQ(target[0].tensor[0], 3.0);
  EXPECT_EQ(target[1].tensor[3], 4.0);

  std::vector<NamedTensor> wrong{{"a", Tensor::zeros({4}, true)}};
  EXPECT_THROW(restore_checkpoint(path, wrong), std::runtime_error);
  std::filesystem::remove(path);
}

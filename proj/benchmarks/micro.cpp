#include <benchmark/benchmark.h>

#include <random>

#include "mmtrack/hungarian.hpp"
#include "mmtrack/motionnet.hpp"
#include "mmtrack/pipeline.hpp"
#include "mmtrack/simworld.hpp"
#include "mmtrack/ssm.hpp"

using namespace mmtrack;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = n01(rng);
  return Tensor::from(shape, std::move(v));
}

}  // namespace

static void BM_SelectiveScan(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const SsmParams p = SsmParams::init(16, 8, "bench", 1);
  const Tensor tokens = random_tensor({len, 16}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(selective_scan(tokens, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_SelectiveScan)->RangeMultiplier(4)->Range(16, 1024);

static void BM_CrossCorrelation(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({8, side, side}, 3), b = random_tensor({8, side, side}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(cross_correlation(a, b, 3));
}
BENCHMARK(BM_CrossCorrelation)->Arg(8)->Arg(16)->Arg(32);

static void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CostMatrix cost(n, n);
  for (auto& v : cost.values) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(cost));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(8, 128);

// One frame pair through the trained-size network at 256 x 256.
static void BM_MotionNetPredict(benchmark::State& state) {
  const SequenceData seq = generate_sequence(scenario("pan", 1), 2);
  const FeaturePyramid t = rasterize_features(seq, 0), t1 = rasterize_features(seq, 1);
  const MotionNet net(MotionRecipe{}.net, 1);
  for (auto _ : state) benchmark::DoNotOptimize(net.predict(t, t1));
}
BENCHMARK(BM_MotionNetPredict)->Unit(benchmark::kMillisecond);

static void BM_TrackSequence(benchmark::State& state) {
  const auto model = static_cast<MotionModel>(state.range(0));
  const SequenceData seq = generate_sequence(scenario("pan", 2), 100);
  std::vector<FrameDetections> dets(seq.frame_count());
  for (std::size_t t = 0; t < seq.frame_count(); ++t)
    for (const auto& a : seq.annotations[t]) dets[t].push_back({a.box, 0.9, a.category});
  const std::vector<MotionMap> maps = exact_maps(seq);
  for (auto _ : state) benchmark::DoNotOptimize(track_sequence(dets, model, TrackerConfig{}, &maps));
  state.SetLabel(to_string(model));
}
BENCHMARK(BM_TrackSequence)
    ->Arg(static_cast<int>(MotionModel::motion_map))
    ->Arg(static_cast<int>(MotionModel::kalman))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "scopegen/calibrator.hpp"
#include "scopegen/clm.hpp"
#include "scopegen/conformal.hpp"
#include "scopegen/predictor.hpp"
#include "scopegen/world.hpp"

using namespace scopegen;

namespace {

CalibrationConfig three_stage(const SyntheticWorld& world) {
  CalibrationConfig config;
  config.filters = {FilterSpec::diversity(world.distance_fn(), 1.0), FilterSpec::quality()};
  config.generation_rule.clamp_quality = true;
  config.seed = 5;
  return config;
}

void BM_ConformalQuantile(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  for (auto& s : scores) s = u(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conformal_quantile(std::span<const double>(scores), 0.1));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ConformalQuantile)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity();

void BM_GreedyDiversity(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  PredictionSet source;
  for (std::size_t i = 0; i < n; ++i) {
    Output o;
    o.id = i;
    o.token = static_cast<std::int64_t>(mix_seed(3, i) % 10000);
    source.items.push_back(o);
  }
  const auto spec = FilterSpec::diversity(
      [](const Output& a, const Output& b) { return std::abs(double(a.token - b.token)) / 1e4; }, 1.0);
  for (auto _ : state) {
    GreedySampler sampler(source, spec, 7);
    while (!sampler.exhausted()) benchmark::DoNotOptimize(sampler.next());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GreedyDiversity)->RangeMultiplier(4)->Range(8, 1024)->Complexity();

void BM_Predict(benchmark::State& state) {
  auto world = std::make_shared<SyntheticWorld>();
  const auto data = world->draw(600, 1);
  const auto test = world->draw(256, 2, 600);
  const auto config = three_stage(*world);
  ExactMatchOracle oracle;
  const auto result = calibrate(data, world, oracle, config);
  const auto pipeline = make_pipeline(world, config, result);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& ex = test[i++ % test.size()];
    benchmark::DoNotOptimize(predict(ex.condition, pipeline, ex.condition.id));
  }
}
BENCHMARK(BM_Predict);

void BM_Calibrate(benchmark::State& state) {
  auto world = std::make_shared<SyntheticWorld>();
  const auto data = world->draw(static_cast<std::size_t>(state.range(0)), 1);
  const auto config = three_stage(*world);
  for (auto _ : state) {
    ExactMatchOracle oracle;
    benchmark::DoNotOptimize(calibrate(data, world, oracle, config));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Calibrate)->Arg(150)->Arg(600)->Arg(2400)->Unit(benchmark::kMillisecond);

void BM_ClmCalibrate(benchmark::State& state) {
  SyntheticWorld world;
  const auto data = world.draw(static_cast<std::size_t>(state.range(0)), 1);
  ClmOptions options;
  options.similarity = [&world](const Output& a, const Output& b) { return world.similarity(a, b); };
  for (auto _ : state) {
    ExactMatchOracle oracle;
    benchmark::DoNotOptimize(clm_calibrate_best(data, world, oracle, options, 0.3));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClmCalibrate)->Arg(150)->Arg(600)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

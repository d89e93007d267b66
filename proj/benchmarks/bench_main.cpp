#include "wdro/data.hpp"
#include "wdro/elimination.hpp"
#include "wdro/losses.hpp"
#include "wdro/nn.hpp"
#include "wdro/particles.hpp"
#include "wdro/transport_net.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace wdro;

namespace {

const data::Dataset& regression() {
  static const data::Dataset ds = data::gen_regression_2d(200, 0);
  return ds;
}

}  // namespace

static void BM_GlmEvaluate(benchmark::State& st) {
  losses::GlmRegressionLoss glm;
  const Vec theta = random_theta(2, 0.5, 0);
  const Vec v = regression().sample(0);
  for (auto _ : st) benchmark::DoNotOptimize(glm.evaluate(theta, v, 0));
}
BENCHMARK(BM_GlmEvaluate);

static void BM_GdaStep(benchmark::State& st) {
  losses::GlmRegressionLoss glm;
  Problem prob(glm, regression(), 0.5);
  SolverConfig cfg;
  cfg.momentum = 0.7;
  cfg.batch_size = st.range(0);
  ParticleState s = make_state(regression(), random_theta(2, 0.5, 0), cfg);
  for (auto _ : st) benchmark::DoNotOptimize(gda::step(s, prob, cfg));
}
BENCHMARK(BM_GdaStep)->Arg(40)->Arg(200);

static void BM_ElimIteration(benchmark::State& st) {
  losses::GlmRegressionLoss glm;
  Problem prob(glm, regression(), 0.5);
  SolverConfig cfg;
  cfg.max_iters = 1;
  const Vec theta = random_theta(2, 0.5, 0);
  for (auto _ : st) {
    ParticleState s = make_state(regression(), theta, cfg);
    benchmark::DoNotOptimize(elim::run(s, prob, cfg));
  }
}
BENCHMARK(BM_ElimIteration);

static void BM_MlpForwardBackward(benchmark::State& st) {
  const Index w = st.range(0);
  nn::Mlp net({2, w, w, 3});
  CounterRng rng(1);
  net.init(rng, false);
  const Vec x = Vec::Ones(2);
  const Vec g = Vec::Ones(3);
  nn::Tape tape;
  for (auto _ : st) {
    net.forward(x, tape);
    benchmark::DoNotOptimize(net.backward(tape, g));
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(4)->Arg(16)->Arg(64);

static void BM_MatchingUpdate(benchmark::State& st) {
  TransportNetConfig cfg;
  cfg.sub_batch = 50;
  TransportNet net(cfg);
  std::vector<Index> all(200);
  std::iota(all.begin(), all.end(), Index{0});
  Particles v = regression().samples();
  v.array() += 0.1;
  const TeacherPairs pairs = batch_pairs(regression(), v, all);
  for (auto _ : st) benchmark::DoNotOptimize(net.matching_update(pairs));
}
BENCHMARK(BM_MatchingUpdate);

BENCHMARK_MAIN();

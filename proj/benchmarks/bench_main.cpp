#include <benchmark/benchmark.h>

#include "tfhtmm/gibbs.hpp"
#include "tfhtmm/inference.hpp"
#include "tfhtmm/sp_baseline.hpp"
#include "tfhtmm/tasks.hpp"

using namespace tfhtmm;

namespace {

const CorpusSplit& synthetic() {
  static const CorpusSplit split = [] {
    Rng rng(1);
    const GeneratorConfig cfg;
    return split_stratified(generate_synthetic(cfg, rng), cfg.test_per_type);
  }();
  return split;
}

HyperParams bench_hyper(int C) {
  HyperParams h = HyperParams::defaults(C, 3, 4, 3, 100);
  h.seed = 7;
  return h;
}

TfModelParams trained_tf(int C) {
  HyperParams h = bench_hyper(C);
  h.iterations = 20;
  return train(synthetic().train, h).params;
}

}  // namespace

static void BM_MarginalLikelihoodTf(benchmark::State& state) {
  const TfModelParams p = trained_tf(static_cast<int>(state.range(0)));
  const auto& trees = synthetic().test.trees;
  for (auto _ : state) {
    double total = 0.0;
    for (const auto& t : trees) total += marginal_log_likelihood(t, p);
    benchmark::DoNotOptimize(total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trees.size()));
}
BENCHMARK(BM_MarginalLikelihoodTf)->Arg(2)->Arg(10)->Arg(20);

static void BM_MarginalLikelihoodSp(benchmark::State& state) {
  HyperParams h = bench_hyper(static_cast<int>(state.range(0)));
  h.iterations = 20;
  const SpModelParams p = sp_train(synthetic().train, h).params;
  const auto& trees = synthetic().test.trees;
  for (auto _ : state) {
    double total = 0.0;
    for (const auto& t : trees) total += sp_marginal_log_likelihood(t, p);
    benchmark::DoNotOptimize(total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trees.size()));
}
BENCHMARK(BM_MarginalLikelihoodSp)->Arg(2)->Arg(10)->Arg(20);

static void BM_LabelMarginals(benchmark::State& state) {
  const TfModelParams p = trained_tf(10);
  const auto& trees = synthetic().test.trees;
  for (auto _ : state)
    for (const auto& t : trees) benchmark::DoNotOptimize(node_label_marginals(t, p));
}
BENCHMARK(BM_LabelMarginals);

static void BM_GibbsSweep(benchmark::State& state) {
  const HyperParams h = bench_hyper(static_cast<int>(state.range(0)));
  const auto& corpus = synthetic().train;
  ChainState chain = init_chain(corpus, h);
  for (auto _ : state) benchmark::DoNotOptimize(gibbs_sweep(chain, corpus, h));
}
BENCHMARK(BM_GibbsSweep)->Arg(2)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

static void BM_SpGibbsSweep(benchmark::State& state) {
  const HyperParams h = bench_hyper(static_cast<int>(state.range(0)));
  const auto& corpus = synthetic().train;
  SpChainState chain = sp_init_chain(corpus, h);
  for (auto _ : state) benchmark::DoNotOptimize(sp_gibbs_sweep(chain, corpus, h));
}
BENCHMARK(BM_SpGibbsSweep)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_SizeMove(benchmark::State& state) {
  const int C = static_cast<int>(state.range(0));
  const HyperParams h = bench_hyper(C);
  const auto& corpus = synthetic().train;
  ChainState chain = init_chain(corpus, h);
  HardClustering cl = chain.params.clustering;
  Rng rng(3);
  for (auto _ : state) {
    HardClustering next = propose_size_move(cl, h, rng);
    const double a = size_acceptance(cl, next, chain.stats, h, chain.params.lambda0, 1.0);
    if (sample_uniform(rng) < a) cl = std::move(next);
    benchmark::DoNotOptimize(a);
  }
}
BENCHMARK(BM_SizeMove)->Arg(2)->Arg(10)->Arg(20);
BENCHMARK_MAIN();

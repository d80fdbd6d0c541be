#include <random>

#include <benchmark/benchmark.h>

#include "affect/coupling.hpp"
#include "affect/losses.hpp"
#include "affect/network.hpp"
#include "affect/synthdata.hpp"

using namespace affect;

namespace {

Matrix random_input(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  return x;
}

void BM_Forward(benchmark::State& state) {
  const Network net(NetworkConfig{});
  const Matrix x = random_input(state.range(0), 32);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, Mode::kEval));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(751);

void BM_ForwardBackward(benchmark::State& state) {
  Network net(NetworkConfig{});
  const Matrix x = random_input(state.range(0), 32);
  std::mt19937_64 rng(2);
  for (auto _ : state) {
    auto fwd = net.forward(x, Mode::kTrain, &rng);
    const auto n = static_cast<std::size_t>(x.rows());
    auto pg = ProbabilityGradients::zeros(n, kNumEmotions);
    pg.emo_probs.setConstant(0.01);
    pg.au_probs.setConstant(0.01);
    pg.va.setConstant(0.01);
    net.backward(fwd.cache, to_logit_gradients(fwd.preds, pg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(751);

void BM_MixtureQ(benchmark::State& state) {
  Matrix p = random_input(state.range(0), 7).array().exp().matrix();
  for (Eigen::Index r = 0; r < p.rows(); ++r) p.row(r) /= p.row(r).sum();
  for (auto _ : state) benchmark::DoNotOptimize(mixture_q(p, cognitive_table(), true));
}
BENCHMARK(BM_MixtureQ)->Arg(751);

void BM_Generate(benchmark::State& state) {
  GeneratorConfig g;
  g.n_va = g.n_au = g.n_expr = static_cast<std::size_t>(state.range(0));
  g.n_test = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate(g));
  state.SetItemsProcessed(state.iterations() * 3 * state.range(0));
}
BENCHMARK(BM_Generate)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();

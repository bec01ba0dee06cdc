#include <benchmark/benchmark.h>

#include "esam/eval.hpp"
#include "esam/losses.hpp"
#include "esam/model.hpp"
#include "esam/rng.hpp"
#include "esam/tensor.hpp"

namespace {

using namespace esam;

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_MatMulForward(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = random_tensor(n, n, rng);
  Tensor b = random_tensor(n, n, rng);
  for (auto _ : state) {
    Graph g;
    auto out = g.matmul(g.leaf(a), g.leaf(b));
    benchmark::DoNotOptimize(g.value(out).data());
  }
}
BENCHMARK(BM_MatMulForward)->Arg(32)->Arg(128)->Arg(256);

void BM_MatMulBackward(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Tensor a = random_tensor(n, n, rng);
  Tensor b = random_tensor(n, n, rng);
  for (auto _ : state) {
    Graph g;
    auto la = g.leaf(a, true);
    auto lb = g.leaf(b, true);
    g.backward(g.sum(g.matmul(la, lb)));
    benchmark::DoNotOptimize(g.grad(la).data());
  }
}
BENCHMARK(BM_MatMulBackward)->Arg(32)->Arg(128);

void BM_CombinedLoss(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  Tensor ds = random_tensor(n, 128, rng);
  Tensor dt = random_tensor(n, 128, rng);
  Tensor probs_s = random_tensor(1, n, rng);
  Tensor probs_t = random_tensor(1, n, rng);
  for (double& v : probs_s.values()) v = 0.5 + 0.49 * v;
  for (double& v : probs_t.values()) v = 0.5 + 0.49 * v;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(rng.uniform_index(2));
  LossConfig cfg;
  for (auto _ : state) {
    Graph g;
    auto lds = g.leaf(ds, true);
    auto ldt = g.leaf(dt, true);
    auto ls = loss_pointwise_ce(g, g.leaf(probs_s, true), labels);
    auto da = loss_a2c(g, lds, ldt);
    auto dcc = loss_center_clustering(g, lds, labels, cfg);
    auto dcp = loss_self_training(g, g.leaf(probs_t, true), cfg);
    auto total = loss_total(g, ls, da, dcc, dcp, cfg);
    g.backward(total);
    benchmark::DoNotOptimize(g.scalar(total));
  }
}
BENCHMARK(BM_CombinedLoss)->Arg(10)->Arg(64);

void BM_RankingMetrics(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<std::int64_t> items(n);
  std::vector<double> scores(n);
  std::vector<std::int64_t> rel;
  for (std::size_t i = 0; i < n; ++i) {
    items[i] = static_cast<std::int64_t>(i);
    scores[i] = rng.uniform();
    if (rng.uniform() < 0.05) rel.push_back(items[i]);
  }
  for (auto _ : state) {
    RankedList r = make_ranked(0, items, scores, rel);
    double v = ndcg_at_k(r, 20) + recall_at_k(r, 20) + average_precision(r);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_RankingMetrics)->Arg(1000)->Arg(10000);

void BM_ItemTowerForward(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  TowerConfig cfg;
  cfg.query_field_vocab = {100};
  cfg.item_field_vocab = {8, 5000};
  cfg.num_items = 5000;
  cfg.embed_dim = 16;
  cfg.hidden = {256, 128};
  ModelParams params = init_params(cfg, 1);
  Rng rng(5);
  std::vector<ItemInput> items(n);
  for (auto& it : items)
    it.fields = {{static_cast<std::int64_t>(rng.uniform_index(8))},
                 {static_cast<std::int64_t>(rng.uniform_index(5000))}};
  for (auto _ : state) {
    Tensor f = forward_item_features(params, cfg, items);
    benchmark::DoNotOptimize(f.data());
  }
}
BENCHMARK(BM_ItemTowerForward)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();

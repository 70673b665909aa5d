#include <numeric>

#include <benchmark/benchmark.h>

#include "ttm/ttransformer.hpp"

namespace {

using namespace ttm::nn;

void BM_ForwardDesk(benchmark::State& state) {
  const auto cfg = ModelConfig::desk();
  const auto w = ModelWeights::initialize(cfg, 1);
  const auto data = random_dataset(1, cfg.seq_len, cfg.input_dim, 2);
  const Mat x = data.sequence(0);
  for (auto _ : state) benchmark::DoNotOptimize(forward(w, x));
}
BENCHMARK(BM_ForwardDesk)->Unit(benchmark::kMicrosecond);

void BM_GradientsDesk(benchmark::State& state) {
  const auto cfg = ModelConfig::desk();
  const auto w = ModelWeights::initialize(cfg, 1);
  const auto batch_size = static_cast<std::size_t>(state.range(0));
  const auto data = random_dataset(batch_size, cfg.seq_len, cfg.input_dim, 2);
  std::vector<std::size_t> batch(batch_size);
  std::iota(batch.begin(), batch.end(), std::size_t{0});
  for (auto _ : state) benchmark::DoNotOptimize(gradients(w, data, batch).loss);
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch_size));
}
BENCHMARK(BM_GradientsDesk)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_EvaluateDesk(benchmark::State& state) {
  const auto cfg = ModelConfig::desk();
  const auto w = ModelWeights::initialize(cfg, 1);
  const auto data = random_dataset(128, cfg.seq_len, cfg.input_dim, 2);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_mse(w, data, idx));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * idx.size()));
}
BENCHMARK(BM_EvaluateDesk)->Unit(benchmark::kMillisecond);

}  // namespace

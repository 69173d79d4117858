#include <benchmark/benchmark.h>

#include "icnf/classify.hpp"
#include "icnf/forecast.hpp"
#include "icnf/metrics.hpp"
#include "icnf/nn.hpp"
#include "icnf/ops.hpp"

using namespace icnf;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.normal();
  return Tensor(std::move(shape), std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(256);

// One LSTM step at the forecaster's shape: batch 32, 53 inputs, 50 hidden.
void BM_LstmStep(benchmark::State& state) {
  Rng rng(3);
  ParamStore p;
  nn::add_lstm(p, "l", 53, 50, rng);
  const auto lstm = nn::lstm_weights(p, "l");
  const std::vector<Tensor> steps{random_tensor({32, 53}, 4)};
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(nn::run_lstm(lstm, steps));
}
BENCHMARK(BM_LstmStep);

void BM_LstmForecasterTrainStep(benchmark::State& state) {
  forecast::Forecaster f(forecast::LstmForecaster(forecast::LstmForecasterConfig{}, 5));
  const auto x = random_tensor({32, 24, 53}, 6);
  for (auto _ : state) {
    f.params().zero_grad();
    backward(f.loss(x));
  }
}
BENCHMARK(BM_LstmForecasterTrainStep)->Unit(benchmark::kMillisecond);

void BM_BrainLmForward(benchmark::State& state) {
  forecast::BrainLmConfig cfg;
  cfg.d_model = static_cast<std::size_t>(state.range(0));
  cfg.ff = 4 * cfg.d_model;
  const forecast::BrainLm m(cfg, 7);
  const auto x = random_tensor({32, 24, 53}, 8);
  const auto mask = m.default_mask();
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x, mask));
}
BENCHMARK(BM_BrainLmForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TaLstmForward(benchmark::State& state) {
  classify::TaLstmConfig cfg;
  cfg.hidden = 16;
  const classify::TaLstm m(cfg, 9);
  const auto x = random_tensor({32, static_cast<std::size_t>(state.range(0)), 53}, 10);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x));
}
BENCHMARK(BM_TaLstmForward)->Arg(137)->Arg(198)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(11);
  std::vector<double> s(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.uniform(0, 1);
    y[i] = static_cast<int>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::auc(s, y));
}
BENCHMARK(BM_Auc)->Arg(51)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>

#include "cpn/rnn.hpp"

namespace {

void BM_SolveSymmetric(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto s = cpn::rnn::RnnState::symmetric(n);
    cpn::rnn::solve_steady_state(s);
    benchmark::DoNotOptimize(s.q().data());
  }
}
BENCHMARK(BM_SolveSymmetric)->Arg(2)->Arg(3)->Arg(4)->Arg(8);

void BM_RlUpdate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto s = cpn::rnn::RnnState::symmetric(n);
  cpn::rnn::solve_steady_state(s);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> reward(50.0, 1000.0);
  std::size_t k = 0;
  for (auto _ : state) {
    cpn::rnn::rl_update(s, k++ % n, reward(rng));
    benchmark::DoNotOptimize(s.q().data());
  }
}
BENCHMARK(BM_RlUpdate)->Arg(2)->Arg(3)->Arg(4);

}  // namespace

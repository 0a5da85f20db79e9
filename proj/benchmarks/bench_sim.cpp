#include <benchmark/benchmark.h>

#include "cpn/scenario.hpp"
#include "cpn/simnet.hpp"

namespace {

void BM_DefaultScenario(benchmark::State& state) {
  cpn::DefaultScenarioOptions opts;
  opts.duration_s = 10.0;
  opts.background_rate_bps = static_cast<double>(state.range(0)) * 1e6;
  const auto scenario = cpn::default_scenario(opts);
  std::uint64_t events = 0;
  for (auto _ : state) {
    cpn::sim::SimConfig cfg;
    cfg.duration_s = opts.duration_s;
    cpn::sim::Simulator sim(scenario, cfg);
    sim.run();
    events += sim.events_executed();
  }
  state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_DefaultScenario)->Arg(1)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

}  // namespace

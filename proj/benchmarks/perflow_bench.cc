#include <benchmark/benchmark.h>

#include "perflow/analytic.h"
#include "perflow/fluid.h"
#include "perflow/metrics.h"
#include "perflow/packetsim.h"
#include "perflow/scenario.h"

namespace {

using namespace perflow;

Scenario TwoTcp(Discipline disc, double horizon) {
  Scenario s = LoadScenario(
      "capacity_mbps = 10\nbuffer_kb = 150\ndiscipline = fq\nhorizon_s = 10\n"
      "[flow] kind=tcp rtt_ms=20\n[flow] kind=tcp rtt_ms=50\n");
  s.discipline = disc;
  s.horizon = horizon;
  return s;
}

void BM_FluidSecond(benchmark::State& state) {
  Scenario s = TwoTcp(Discipline::kFq, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fluid::Simulate(s));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(1.0 / 50e-6));
}
BENCHMARK(BM_FluidSecond)->Unit(benchmark::kMillisecond);

void BM_FluidSqfCycle(benchmark::State& state) {
  Scenario s = TwoTcp(Discipline::kSqf, 10.0);
  s.buffer = 4000.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fluid::Simulate(s));
  }
}
BENCHMARK(BM_FluidSqfCycle)->Unit(benchmark::kMillisecond);

void BM_PacketSimMinute(benchmark::State& state) {
  Scenario s = LoadScenario(
      "capacity_mbps = 10\nbuffer_kb = 400\ndiscipline = sqf\nhorizon_s = 60\n"
      "[flow] kind=tcp rtt_ms=10\n[flow] kind=tcp rtt_ms=100\n"
      "[flow] kind=tcp rtt_ms=200\n");
  for (auto _ : state) {
    benchmark::DoNotOptimize(packet::RunPacketSim(s));
  }
}
BENCHMARK(BM_PacketSimMinute)->Unit(benchmark::kMillisecond);

void BM_SqfSteady(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        analytic::SqfSteady(2500.0, 400.0, 833.3333, 100.0));
  }
}
BENCHMARK(BM_SqfSteady);

void BM_LogFDecay(benchmark::State& state) {
  double t = 0.0;
  for (auto _ : state) {
    t += 1e-4;
    if (t > 4.0) t = 1e-4;
    benchmark::DoNotOptimize(
        analytic::LogFDecay(1666.7, 0.0, t, 400.0, 833.3333));
  }
}
BENCHMARK(BM_LogFDecay);

void BM_JainIndex(benchmark::State& state) {
  std::vector<double> x(static_cast<size_t>(state.range(0)));
  for (size_t i = 0; i < x.size(); ++i) {
    x[i] = 1.0 + static_cast<double>(i % 13);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::JainIndex(x));
  }
}
BENCHMARK(BM_JainIndex)->Arg(16)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "support.hpp"
#include "vrduqa/metrics.hpp"

using namespace vrduqa;

namespace {

void BM_ComputeReport(benchmark::State& state) {
  const auto fx = testing::random_metric_fixture(3, static_cast<std::size_t>(state.range(0)), 10);
  const auto ctx = metrics::JoinContext::build(fx.questions, fx.documents);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::compute_report(fx.records, ctx));
  state.counters["records"] = static_cast<double>(fx.records.size());
}
BENCHMARK(BM_ComputeReport)->Arg(50)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_AccD(benchmark::State& state) {
  const auto fx = testing::random_metric_fixture(4, 400, 10);
  metrics::Records records;
  for (const auto& r : fx.records) records.push_back(&r);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::acc_d(records));
}
BENCHMARK(BM_AccD);

}  // namespace

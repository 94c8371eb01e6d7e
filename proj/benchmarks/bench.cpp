#include <benchmark/benchmark.h>

#include "vterr/distance.hpp"
#include "vterr/maskops.hpp"
#include "vterr/metrics.hpp"
#include "vterr/minip.hpp"
#include "vterr/registration.hpp"
#include "vterr/synth.hpp"

using namespace vterr;

namespace {

const synth::Phantom &phantom() {
  static const auto p = [] {
    synth::PhantomSpec s;
    s.seed = 11;
    return synth::generate(s);
  }();
  return p;
}

const synth::StandardCase &standard() {
  static const auto c = synth::standard_case(phantom());
  return c;
}

void BM_Edt(benchmark::State &st) {
  const auto ica = standard().truth.ica();
  const auto edge = metrics::boundary_mask(ica);
  for (auto _ : st)
    benchmark::DoNotOptimize(squared_distance_transform(edge));
}
BENCHMARK(BM_Edt)->Unit(benchmark::kMillisecond);

void BM_MinIp(benchmark::State &st) {
  const auto &seq = phantom().sequence;
  for (auto _ : st)
    benchmark::DoNotOptimize(minip::compute_minip(seq));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(seq.frames.size()));
}
BENCHMARK(BM_MinIp)->Unit(benchmark::kMillisecond);

void BM_OverlapReport(benchmark::State &st) {
  const auto &truth = standard().truth;
  const auto pred = synth::simulated_model_prediction(truth, 5);
  for (auto _ : st)
    benchmark::DoNotOptimize(metrics::overlap_report(pred, truth));
}
BENCHMARK(BM_OverlapReport)->Unit(benchmark::kMillisecond);

void BM_Cleanup(benchmark::State &st) {
  const auto ica = standard().truth.ica();
  const auto p = maskops::MorphologyParams::with_radius(static_cast<int>(st.range(0)));
  for (auto _ : st)
    benchmark::DoNotOptimize(maskops::cleanup(ica, p));
}
BENCHMARK(BM_Cleanup)->Arg(1)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_Optimize(benchmark::State &st) {
  const auto &c = standard();
  const auto moving = warp(c.minip, AffineTransform2D{4, 1.03, 1.03, 15, -8});
  for (auto _ : st)
    benchmark::DoNotOptimize(reg::optimize(moving, c.minip));
}
BENCHMARK(BM_Optimize)->Unit(benchmark::kMillisecond)->Iterations(5);

} // namespace
BENCHMARK_MAIN();

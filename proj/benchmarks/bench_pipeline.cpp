#include <benchmark/benchmark.h>

#include "subprobe/blr.hpp"
#include "subprobe/probe.hpp"
#include "subprobe/protocol.hpp"
#include "subprobe/signal.hpp"
#include "subprobe/sim.hpp"

using namespace subprobe;

namespace {

signal::Recording session_recording(double fs) {
  const auto schedule = protocol::build_counting_schedule(1);
  const auto profile = sim::draw_profile(sim::ProfileDistribution{}, 1);
  return sim::synthesize_recording(schedule, profile, fs, sim::default_montage(), 1);
}

void BM_DesignLowpass(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(signal::design_lowpass(signal::FilterDesign{}));
  }
}
BENCHMARK(BM_DesignLowpass);

void BM_ApplyFir(benchmark::State& state) {
  const auto taps = signal::design_lowpass(signal::FilterDesign{});
  const Eigen::VectorXd x = Eigen::VectorXd::Random(1228);
  for (auto _ : state) {
    benchmark::DoNotOptimize(signal::apply_fir(x, taps));
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_ApplyFir);

void BM_MedianDecimate(benchmark::State& state) {
  signal::Epoch epoch;
  epoch.data = Eigen::MatrixXd::Random(10, 1228);
  epoch.fs = 1024.0;
  epoch.n_pre = 204;
  for (Eigen::Index c = 0; c < 10; ++c) {
    epoch.channel_labels.push_back("ch" + std::to_string(c));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(signal::median_decimate(epoch, 4));
  }
}
BENCHMARK(BM_MedianDecimate);

void BM_BackgroundNoise(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::background_noise(n, 1024.0, 4.0, 7));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_BackgroundNoise)->Arg(1 << 14)->Arg(1 << 18);

void BM_SynthesizeCountingSession(benchmark::State& state) {
  const auto schedule = protocol::build_counting_schedule(1);
  const auto profile = sim::draw_profile(sim::ProfileDistribution{}, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::synthesize_recording(
        schedule, profile, 1024.0, sim::default_montage(), 1));
  }
}
BENCHMARK(BM_SynthesizeCountingSession)->Unit(benchmark::kMillisecond);

void BM_PreprocessCountingSession(benchmark::State& state) {
  const auto schedule = protocol::build_counting_schedule(1);
  const auto recording = session_recording(1024.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(signal::preprocess(recording, schedule,
                                                protocol::kCountedCandidate));
  }
}
BENCHMARK(BM_PreprocessCountingSession)->Unit(benchmark::kMillisecond);

void BM_TrainBoostedModel(benchmark::State& state) {
  const auto schedule = protocol::build_counting_schedule(1);
  const auto recording = session_recording(1024.0);
  const auto data =
      signal::preprocess(recording, schedule, protocol::kCountedCandidate);
  blr::TrainConfig config;
  config.rounds = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(blr::train(data, config));
  }
  state.SetLabel(std::to_string(data.n_rows()) + " epochs x " +
                 std::to_string(data.X.cols()) + " features");
}
BENCHMARK(BM_TrainBoostedModel)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_CandidateScores(benchmark::State& state) {
  const auto schedule = protocol::build_counting_schedule(1);
  const auto recording = session_recording(1024.0);
  const auto data =
      signal::preprocess(recording, schedule, protocol::kCountedCandidate);
  blr::TrainConfig config;
  config.rounds = 10;
  const auto model = blr::train(data, config);
  for (auto _ : state) {
    benchmark::DoNotOptimize(probe::candidate_scores(model, data));
  }
}
BENCHMARK(BM_CandidateScores)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

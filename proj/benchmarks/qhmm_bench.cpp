// Copyright 2026 The qhmm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <vector>

#include "qhmm/experiments.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/metrics.hpp"
#include "qhmm/signal.hpp"

namespace {

qhmm::Dataset bench_dataset(std::size_t shots, std::size_t segments) {
  qhmm::ExperimentConfig cfg;
  cfg.n_ground = shots;
  cfg.n_excited = shots;
  cfg.sim.n_segments = segments;
  cfg.seed = 42;
  return qhmm::simulate_experiment_dataset(cfg);
}

}  // namespace

static void BM_ForwardBackward(benchmark::State& state) {
  const auto segments = static_cast<std::size_t>(state.range(0));
  const qhmm::Dataset data = bench_dataset(1, segments);
  const qhmm::HmmModel model = qhmm::simulation_model(qhmm::SimulationSpec{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(qhmm::forward_backward(model, data.shots[1].obs));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(9)->Arg(243)->Arg(2430);

static void BM_BaumWelchIteration(benchmark::State& state) {
  const qhmm::Dataset data = bench_dataset(static_cast<std::size_t>(state.range(0)), 243);
  const auto seqs = data.sequences();
  const auto init = qhmm::InitStrategy::labeled(data.labels());
  qhmm::BaumWelchOptions opts;
  opts.max_iter = 1;
  opts.threads = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(qhmm::baum_welch(seqs, 2, init, opts));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2 * 243);
}
BENCHMARK(BM_BaumWelchIteration)->Args({500, 1})->Args({500, 4})->Unit(benchmark::kMillisecond);

static void BM_DoubleGaussianFit(benchmark::State& state) {
  const qhmm::Dataset data = bench_dataset(static_cast<std::size_t>(state.range(0)), 9);
  std::vector<qhmm::IqPoint> p0, p1;
  for (const auto& s : data.shots) {
    (s.prepared_label == 0 ? p0 : p1).push_back(qhmm::demodulate_window(s.obs, 9 * 80e-9));
  }
  const qhmm::Projection pr = qhmm::project_onto_centroid_axis(p0, p1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qhmm::fit_equal_variance_gaussians(pr.s0, pr.s1, qhmm::FitMode::kDouble));
  }
}
BENCHMARK(BM_DoubleGaussianFit)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

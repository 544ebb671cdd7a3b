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

#include "qhmm/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <limits>

#include "gtest/gtest.h"
#include "qhmm/error.hpp"
#include "qhmm/file_util.hpp"
#include "qhmm/model_io.hpp"
#include "qhmm/signal.hpp"

using namespace qhmm;

namespace {

ExperimentConfig small_config(std::size_t shots, std::size_t segments) {
  ExperimentConfig cfg;
  cfg.n_ground = shots;
  cfg.n_excited = shots;
  cfg.train_per_class = shots;
  cfg.sim.n_segments = segments;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(ExperimentConfig, json_round_trip) {
  ExperimentConfig cfg = small_config(100, 30);
  cfg.t1_grid_s = {2e-6, 4e-6};
  cfg.thresholds = {0.0, 0.9};
  cfg.bootstrap.n_resamples = 7;
  cfg.sim.pre_delay_s = 0.5e-6;
  cfg.sim.r_window = 20.0;
  const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json().dump(), cfg.to_json().dump());
  EXPECT_DOUBLE_EQ(back.sim.r_per_segment(), 20.0 / 9.0);
}

TEST(ExperimentConfig, rejects_bad_documents) {
  EXPECT_THROW(ExperimentConfig::from_json({{"seeds", 1}}), SchemaError);
  EXPECT_THROW(ExperimentConfig::from_json({{"simulation", {{"t1", 1.0}}}}), SchemaError);
  EXPECT_THROW(ExperimentConfig::from_json({{"seed", "one"}}), SchemaError);
  EXPECT_THROW(ExperimentConfig::from_json({{"thresholds", {0.9, 0.1}}}), InputError);
  EXPECT_THROW(ExperimentConfig::from_json({{"shot_counts", {{"ground", 0}}}}), InputError);
}

TEST(SimulationSpec, default_window_separation) {
  SimulationSpec spec;
  EXPECT_NEAR(ideal_fidelity(spec.resolved_r_window()), 0.9914, 1e-10);
  const HmmModel m = simulation_model(spec);
  const double d2 = m.emission(1).mean().i * m.emission(1).mean().i + m.emission(1).mean().q * m.emission(1).mean().q;
  EXPECT_NEAR(d2, spec.r_per_segment(), 1e-12);
  EXPECT_NEAR(extract_t1_eff(m), 14.46e-6, 1e-15);
}

TEST(SweepResult, csv_layout) {
  SweepResult s;
  s.x_name = "t";
  s.x = {1.0, 2.0};
  s.add_series("a", false).y = {0.5, std::numeric_limits<double>::quiet_NaN()};
  Series& b = s.add_series("b", true);
  b.y = {1.0, 2.0};
  b.err = {0.1, 0.2};
  EXPECT_EQ(s.to_csv(), "t,a,b,b_err\n1,0.5,1,0.1\n2,nan,2,0.2\n");
  EXPECT_EQ(&s.get("a"), &s.series[0]);
  EXPECT_THROW(s.get("c"), InputError);
  s.series[0].y.pop_back();
  EXPECT_THROW(s.to_csv(), InputError);
}

TEST(Fits, through_origin_exact_and_noisy) {
  const LinearFit exact = fit_through_origin({1, 2, 3}, {2, 4, 6});
  EXPECT_DOUBLE_EQ(exact.slope, 2.0);
  EXPECT_DOUBLE_EQ(exact.slope_se, 0.0);
  const LinearFit noisy = fit_through_origin({1, 2, 3}, {1, 2, 4});
  EXPECT_NEAR(noisy.slope, 17.0 / 14.0, 1e-15);
  const double rss = std::pow(1 - 17.0 / 14, 2) + std::pow(2 - 34.0 / 14, 2) + std::pow(4 - 51.0 / 14, 2);
  EXPECT_NEAR(noisy.slope_se, std::sqrt(rss / 2.0 / 14.0), 1e-15);
  EXPECT_THROW(fit_through_origin({1}, {1}), InputError);
  EXPECT_THROW(fit_through_origin({0, 0}, {1, 2}), DomainError);
}

TEST(Fits, exponential_recovers_exact_decay) {
  std::vector<double> x, y;
  for (int k = 0; k < 9; ++k) {
    x.push_back(k * 1e-6);
    y.push_back(0.97 * std::exp(-x.back() / 14.46e-6));
  }
  const ExponentialFit f = fit_exponential(x, y);
  EXPECT_NEAR(f.amplitude, 0.97, 1e-9);
  EXPECT_NEAR(f.tau_s, 14.46e-6, 1e-12);
  EXPECT_NEAR(f.tau_se_s, 0.0, 1e-12);
  EXPECT_THROW(fit_exponential({0, 1}, {1, 0.5}), InputError);
}

TEST(Bootstrap, single_resample_is_degenerate) {
  ExperimentConfig cfg = small_config(60, 20);
  cfg.bootstrap = {1, 40};
  const Dataset data = simulate_experiment_dataset(cfg);
  const HmmModel ref = train_hmm(data).model;
  const BootstrapStats st = run_bootstrap(data, cfg, ref);
  EXPECT_TRUE(st.degenerate);
  EXPECT_EQ(st.n_used + st.n_flagged, 1u);
  for (double s : st.trans_std) EXPECT_EQ(s, 0.0);
  cfg.bootstrap = {5, 61};
  EXPECT_THROW(run_bootstrap(data, cfg, ref), InputError);
}

TEST(Bootstrap, spread_shrinks_with_subset_size) {
  ExperimentConfig cfg = small_config(1600, 12);
  cfg.threads = 4;
  const Dataset data = simulate_experiment_dataset(cfg);
  const HmmModel ref = train_hmm(data).model;
  cfg.bootstrap = {40, 200};
  const BootstrapStats small = run_bootstrap(data, cfg, ref);
  cfg.bootstrap = {40, 800};
  const BootstrapStats large = run_bootstrap(data, cfg, ref);
  ASSERT_FALSE(small.degenerate);
  ASSERT_FALSE(large.degenerate);
  EXPECT_EQ(small.n_flagged, 0u);
  // Doubling the subset twice halves the spread of the emission means.
  const double ratio = small.means_std[2] / large.means_std[2];
  EXPECT_GT(ratio, 1.4);
  EXPECT_LT(ratio, 2.9);
  EXPECT_NEAR(small.mean_separation, std::sqrt(SimulationSpec{}.r_per_segment()), 0.2);
}

TEST(Bootstrap, thread_count_does_not_change_result) {
  ExperimentConfig cfg = small_config(80, 10);
  cfg.bootstrap = {6, 60};
  const Dataset data = simulate_experiment_dataset(cfg);
  const HmmModel ref = train_hmm(data).model;
  cfg.threads = 1;
  const auto a = run_bootstrap(data, cfg, ref).to_json().dump();
  cfg.threads = 3;
  EXPECT_EQ(run_bootstrap(data, cfg, ref).to_json().dump(), a);
}

TEST(T1Sweep, no_decay_limit) {
  ExperimentConfig cfg = small_config(40, 60);
  cfg.t1_grid_s = {1e3};
  const T1Sweep res = run_t1_sweep(cfg);
  EXPECT_GE(res.sweep.get("a11").y[0], 0.9999);
}

TEST(T1Sweep, learns_generator_lifetime) {
  ExperimentConfig cfg = small_config(400, 243);
  cfg.n_ground = 0;
  cfg.t1_grid_s = {4e-6, 8e-6};
  cfg.threads = 2;
  const T1Sweep res = run_t1_sweep(cfg);
  ASSERT_EQ(res.flagged.size(), 2u);
  for (std::size_t p = 0; p < 2; ++p) {
    EXPECT_FALSE(res.flagged[p]);
    EXPECT_NEAR(res.sweep.get("t1_learned_s").y[p] / cfg.t1_grid_s[p], 1.0, 0.12);
  }
  EXPECT_NEAR(res.fit.slope, 1.0, 0.12);
}

TEST(FidelityVsTime, counts_match_shots_and_no_decay_limit) {
  ExperimentConfig cfg = small_config(2000, 12);
  cfg.sim.t1_eff_s = 1e3;
  cfg.bootstrap.n_resamples = 20;
  cfg.threads = 4;
  const Dataset data = simulate_experiment_dataset(cfg);
  const Dataset train = training_subset(data, 500);
  EXPECT_EQ(train.shots.size(), 1000u);
  const SweepResult s = run_fidelity_vs_time(data, train, simulation_model(cfg.sim), {40e-9, 9 * 80e-9}, cfg);
  ASSERT_EQ(s.x.size(), 1u);
  EXPECT_EQ(s.metadata.at("warnings").size(), 1u);
  const auto& cm = s.metadata.at("counts")[0].at("hmm");
  EXPECT_EQ(cm[0][0].get<int>() + cm[1][0].get<int>(), 2000);
  EXPECT_EQ(cm[0][1].get<int>() + cm[1][1].get<int>(), 2000);
  const double f = ideal_fidelity(cfg.sim.resolved_r_window());
  const double tol = 4.0 * std::sqrt(f * (1 - f) / 2000.0);
  for (const char* c : {"hmm_error", "mvg_error", "svm_error"}) {
    EXPECT_NEAR(s.get(c).y[0], 1.0 - f, tol) << c;
    EXPECT_GT(s.get(c).err[0], 0.0) << c;
  }
  EXPECT_THROW(run_fidelity_vs_time(data, train, simulation_model(cfg.sim), {2e-6}, cfg), InputError);
}

TEST(Efficiency, zero_threshold_keeps_every_shot) {
  ExperimentConfig cfg = small_config(200, 40);
  const Dataset data = simulate_experiment_dataset(cfg);
  std::vector<LabeledPoint> pts;
  for (const auto& s : data.shots) pts.push_back({demodulate_window(s.obs, 2 * 80e-9), s.prepared_label});
  const MvgClassifier mvg = mvg_train(pts);
  const SweepResult r =
      run_efficiency_curve(data, simulation_model(cfg.sim), mvg, {0.0, 0.9, 1.1}, 4 * 80e-9, 2 * 80e-9);
  EXPECT_DOUBLE_EQ(r.get("hmm_efficiency").y[0], 1.0);
  EXPECT_DOUBLE_EQ(r.get("mvg_efficiency").y[0], 1.0);
  EXPECT_LE(r.get("hmm_efficiency").y[1], 1.0);
  EXPECT_DOUBLE_EQ(r.get("hmm_efficiency").y[2], 0.0);
  EXPECT_TRUE(std::isnan(r.get("hmm_fidelity").y[2]));
  EXPECT_EQ(r.metadata.at("shots_excited").get<int>(), 200);
}

TEST(PriorsSweep, excited_population_follows_delay) {
  ExperimentConfig cfg = small_config(1500, 40);
  cfg.sim.t1_eff_s = 4e-6;
  cfg.threads = 4;
  const Dataset data = simulate_experiment_dataset(cfg);
  const HmmModel model = simulation_model(cfg.sim);
  const PriorsSweep res = run_priors_start_sweep(data, model, {0.0, 0.4e-6, 0.8e-6, 1.2e-6}, cfg);
  const auto& pi = res.sweep.get("pi_excited").y;
  EXPECT_GE(pi[0], 0.99);
  for (std::size_t p = 0; p < pi.size(); ++p) {
    const double expect = std::exp(-res.sweep.x[p] / 4e-6);
    EXPECT_NEAR(pi[p], expect, 4.0 * std::sqrt(expect * (1 - expect) / 1500.0) + 0.01);
  }
  EXPECT_NEAR(res.fit.tau_s, 4e-6, 0.8e-6);
}

TEST(PriorsSweep, pre_delay_population) {
  ExperimentConfig cfg = small_config(3000, 30);
  cfg.sim.pre_delay_s = 0.5e-6;
  const Dataset data = simulate_experiment_dataset(cfg);
  const PriorsSweep res = run_priors_start_sweep(data, simulation_model(cfg.sim), {0.0, 0.4e-6, 0.8e-6}, cfg);
  EXPECT_NEAR(res.sweep.get("pi_excited").y[0], std::exp(-0.5 / 14.46), 0.015);
}

TEST(FilteredFidelity, no_decay_limit_matches_generator) {
  ExperimentConfig cfg = small_config(1500, 9);
  cfg.sim.t1_eff_s = 1e3;
  cfg.fit_bootstrap_draws = 5;
  const Dataset data = simulate_experiment_dataset(cfg);
  const auto rows = run_filtered_fidelity(data, simulation_model(cfg.sim), {9 * 80e-9}, cfg);
  ASSERT_EQ(rows.size(), 1u);
  const double f = ideal_fidelity(cfg.sim.resolved_r_window());
  EXPECT_NEAR(rows[0].ideal.fidelity(), f, 0.003);
  EXPECT_NEAR(rows[0].filtered.fidelity(), f, 0.003);
  EXPECT_LT(rows[0].n_split_shots, 30u);
  EXPECT_GT(rows[0].ideal_err.fidelity_std, 0.0);
}

TEST(NamedExperiments, unknown_name_lists_choices) {
  try {
    run_named_experiment("nope", ExperimentConfig{});
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("fidelity-vs-time"), std::string::npos);
  }
}

TEST(NamedExperiments, writes_outputs) {
  const auto dir = std::filesystem::temp_directory_path() / "qhmm_named_experiment";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ExperimentConfig cfg = small_config(300, 30);
  cfg.output_dir = dir;
  cfg.thresholds = {0.0, 0.9};
  cfg.t_int_hmm_s = 10 * 80e-9;
  cfg.t_int_mvg_s = 5 * 80e-9;
  const auto summary = run_named_experiment("efficiency", cfg);
  EXPECT_TRUE(summary.contains("hmm_fidelity_at_zero"));
  EXPECT_TRUE(std::filesystem::exists(dir / "config.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "efficiency.csv"));
  const auto saved = parse_json(read_file(dir / "summary.json"), "summary.json");
  EXPECT_EQ(saved.at("experiment").get<std::string>(), "efficiency");
  std::filesystem::remove_all(dir);
}

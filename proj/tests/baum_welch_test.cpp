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

#include <cmath>

#include "gtest/gtest.h"
#include "qhmm/error.hpp"
#include "qhmm/experiments.hpp"
#include "qhmm/hmm.hpp"
#include "support/random_models.hpp"

using namespace qhmm;

namespace {

std::vector<ObservationSequence> sample_many(const HmmModel& m, std::size_t n, std::size_t len, Rng& rng) {
  std::vector<ObservationSequence> v;
  for (std::size_t k = 0; k < n; ++k) v.push_back(testutil::sample_sequence(m, len, rng));
  return v;
}

}  // namespace

TEST(BaumWelch, log_likelihood_is_non_decreasing) {
  Rng rng(10);
  for (int inst = 0; inst < 10; ++inst) {
    const std::size_t n = 2 + inst % 2;
    const HmmModel truth = testutil::random_model(n, rng);
    const auto data = sample_many(truth, 20, 30, rng);
    const BaumWelchResult res = baum_welch(data, n, InitStrategy::kmeans(static_cast<std::uint64_t>(inst)));
    for (std::size_t k = 1; k < res.log.size(); ++k) {
      ASSERT_GE(res.log[k].log_likelihood, res.log[k - 1].log_likelihood - 1e-9 * std::abs(res.log[k - 1].log_likelihood));
    }
  }
}

TEST(BaumWelch, thread_count_does_not_change_the_model) {
  Rng rng(11);
  const HmmModel truth = testutil::random_model(2, rng);
  const auto data = sample_many(truth, 70, 50, rng);
  BaumWelchOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = baum_welch(data, 2, InitStrategy::kmeans(3), one);
  const auto b = baum_welch(data, 2, InitStrategy::kmeans(3), four);
  EXPECT_TRUE(a.model == b.model);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t k = 0; k < a.log.size(); ++k) EXPECT_EQ(a.log[k].log_likelihood, b.log[k].log_likelihood);
}

TEST(BaumWelch, recovers_generator_parameters) {
  ExperimentConfig cfg;
  cfg.n_ground = 500;
  cfg.n_excited = 500;
  cfg.seed = 5;
  const Dataset data = simulate_experiment_dataset(cfg);
  const BaumWelchResult res = train_hmm(data);
  const HmmModel truth = simulation_model(cfg.sim);
  EXPECT_TRUE(res.converged);
  for (std::size_t d = 0; d < 2; ++d) {
    EXPECT_NEAR(res.model.emission(d).mean().i, truth.emission(d).mean().i, 0.01);
    EXPECT_NEAR(res.model.emission(d).mean().q, truth.emission(d).mean().q, 0.01);
    EXPECT_NEAR(res.model.emission(d).cov().ii, 1.0, 0.02);
  }
  EXPECT_NEAR(res.model.trans(1, 0), truth.trans(1, 0), 0.1 * truth.trans(1, 0));
  EXPECT_LT(res.model.trans(0, 1), 1e-4);
  EXPECT_NEAR(res.model.prior(1), 0.5, 0.03);
}

TEST(BaumWelch, fixed_priors_are_kept) {
  Rng rng(12);
  const HmmModel truth = testutil::random_model(2, rng);
  const auto data = sample_many(truth, 30, 20, rng);
  BaumWelchOptions opts;
  opts.learn_priors = false;
  const HmmModel start = initial_model(data, 2, InitStrategy::kmeans(1)).with_priors({0.3, 0.7});
  const auto res = baum_welch(data, 2, InitStrategy::from(start), opts);
  EXPECT_DOUBLE_EQ(res.model.prior(0), 0.3);
  EXPECT_DOUBLE_EQ(res.model.prior(1), 0.7);
}

TEST(BaumWelch, kmeans_orders_states_by_cluster_size) {
  const Gaussian2D a({0, 0}, {0.1, 0, 0.1}), b({5, 5}, {0.1, 0, 0.1});
  const HmmModel truth({0.2, 0.8}, {0.99, 0.01, 0.01, 0.99}, {a, b}, 1.0);
  Rng rng(13);
  const auto data = sample_many(truth, 50, 40, rng);
  const HmmModel init = initial_model(data, 2, InitStrategy::kmeans(9));
  EXPECT_NEAR(init.emission(0).mean().i, 5.0, 0.2);
  EXPECT_NEAR(init.emission(1).mean().i, 0.0, 0.2);
}

TEST(BaumWelch, single_iteration_cap_reports_non_convergence) {
  Rng rng(14);
  const HmmModel truth = testutil::random_model(2, rng);
  const auto data = sample_many(truth, 10, 30, rng);
  BaumWelchOptions opts;
  opts.max_iter = 1;
  const auto res = baum_welch(data, 2, InitStrategy::kmeans(0), opts);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.log.size(), 1u);
}

TEST(BaumWelch, degenerate_data_stays_finite) {
  std::vector<ObservationSequence> data;
  for (int k = 0; k < 10; ++k) data.emplace_back(std::vector<IqPoint>(20, IqPoint{1.0, 1.0}), 1.0);
  const auto res = baum_welch(data, 2, InitStrategy::kmeans(0));
  for (const auto& rec : res.log) EXPECT_TRUE(std::isfinite(rec.log_likelihood));
}

TEST(BaumWelch, input_errors) {
  const std::vector<ObservationSequence> none;
  EXPECT_THROW(baum_welch(none, 2, InitStrategy::kmeans(0)), InputError);
  std::vector<ObservationSequence> mixed = {ObservationSequence({{0, 0}, {1, 1}}, 1.0),
                                            ObservationSequence({{0, 0}, {1, 1}}, 2.0)};
  EXPECT_THROW(baum_welch(mixed, 2, InitStrategy::kmeans(0)), InputError);
  std::vector<ObservationSequence> two = {ObservationSequence({{0, 0}, {1, 1}}, 1.0)};
  EXPECT_THROW(baum_welch(two, 2, InitStrategy::labeled({0, 1, 1})), InputError);
  EXPECT_THROW(baum_welch(two, 1, InitStrategy::kmeans(0)), InputError);
}

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

#include "qhmm/gaussian.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "gtest/gtest.h"
#include "qhmm/error.hpp"
#include "qhmm/rng.hpp"
#include "support/oracles.hpp"

using namespace qhmm;

TEST(Gaussian2D, log_pdf_matches_direct_density) {
  const Gaussian2D g({0.5, -1.0}, {2.0, 0.6, 0.8});
  for (const IqPoint x : {IqPoint{0, 0}, IqPoint{1.5, -2.0}, IqPoint{-3.0, 4.0}}) {
    EXPECT_NEAR(g.log_pdf(x), std::log(oracle::gaussian_pdf(g, x)), 1e-12);
  }
}

TEST(Gaussian2D, standard_normal_at_mean) {
  const Gaussian2D g({0, 0}, {1, 0, 1});
  EXPECT_NEAR(g.log_pdf({0, 0}), -std::log(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(g.mahalanobis_sq({3, 4}), 25.0, 1e-12);
}

TEST(Gaussian2D, rejects_bad_covariance) {
  EXPECT_THROW(Gaussian2D({0, 0}, {1, 2, 1}), InputError);
  EXPECT_THROW(Gaussian2D({0, 0}, {0, 0, 1}), InputError);
  EXPECT_THROW(Gaussian2D({0, 0}, {-1, 0, 1}), InputError);
  EXPECT_THROW(Gaussian2D({std::nan(""), 0}, {1, 0, 1}), InputError);
  EXPECT_THROW(Gaussian2D({0, 0}, {std::numeric_limits<double>::infinity(), 0, 1}), InputError);
}

TEST(Gaussian2D, emission_logpdf_rejects_non_finite) {
  const Gaussian2D g({0, 0}, {1, 0, 1});
  EXPECT_THROW(emission_logpdf(g, {std::nan(""), 0}), InputError);
  EXPECT_DOUBLE_EQ(emission_logpdf(g, {1, 1}), g.log_pdf({1, 1}));
}

TEST(Gaussian2D, transform_standard_reproduces_covariance) {
  const Gaussian2D g({1, 2}, {2.0, -0.7, 0.5});
  Rng rng(3);
  const int n = 200000;
  double mi = 0, mq = 0, sii = 0, siq = 0, sqq = 0;
  for (int k = 0; k < n; ++k) {
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    const IqPoint p = g.transform_standard(z0, z1);
    mi += p.i;
    mq += p.q;
    sii += (p.i - 1) * (p.i - 1);
    siq += (p.i - 1) * (p.q - 2);
    sqq += (p.q - 2) * (p.q - 2);
  }
  EXPECT_NEAR(mi / n, 1.0, 0.02);
  EXPECT_NEAR(mq / n, 2.0, 0.02);
  EXPECT_NEAR(sii / n, 2.0, 0.03);
  EXPECT_NEAR(siq / n, -0.7, 0.02);
  EXPECT_NEAR(sqq / n, 0.5, 0.01);
}

TEST(Cov2, eigenvalues_and_clamp) {
  const Cov2 c{2.0, 1.0, 2.0};
  const auto ev = c.eigenvalues();
  EXPECT_NEAR(ev[0], 1.0, 1e-14);
  EXPECT_NEAR(ev[1], 3.0, 1e-14);

  bool clamped = true;
  EXPECT_EQ(clamp_covariance(c, 0.5, &clamped), c);
  EXPECT_FALSE(clamped);

  const Cov2 singular{1.0, 1.0, 1.0};
  const Cov2 fixed = clamp_covariance(singular, 1e-3, &clamped);
  EXPECT_TRUE(clamped);
  const auto fev = fixed.eigenvalues();
  EXPECT_NEAR(fev[0], 1e-3, 1e-12);
  EXPECT_NEAR(fev[1], 2.0, 1e-12);
  EXPECT_NO_THROW(Gaussian2D({0, 0}, fixed));
}

TEST(Cov2, variance_floor_scales_with_range) {
  const std::vector<IqPoint> pts = {{0, 0}, {10, 1}, {5, -2}};
  EXPECT_DOUBLE_EQ(variance_floor(pts), 1e-12 * 100.0);
  const std::vector<IqPoint> same = {{1, 1}, {1, 1}};
  EXPECT_GT(variance_floor(same), 0.0);
}

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

// Log-space forward-backward kernel shared by inference and training.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "qhmm/hmm.hpp"

namespace qhmm::detail {

inline constexpr double kProbabilityFloor = 1e-300;

inline double safe_log(double p) noexcept { return std::log(std::max(p, kProbabilityFloor)); }

inline double log_add(double a, double b) noexcept {
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

inline double log_sum_exp(const double* x, std::size_t n) noexcept {
  if (n == 2) return log_add(x[0], x[1]);
  double m = x[0];
  for (std::size_t k = 1; k < n; ++k) m = std::max(m, x[k]);
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(x[k] - m);
  return m + std::log(s);
}

/// Log priors and log transition matrix of a model, floored.
struct LogParams {
  std::size_t n = 0;
  std::vector<double> log_priors;
  std::vector<double> log_trans;  // row-major from x to

  explicit LogParams(const HmmModel& model) : n(model.n_states()), log_priors(n), log_trans(n * n) {
    for (std::size_t d = 0; d < n; ++d) log_priors[d] = safe_log(model.prior(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) log_trans[i * n + j] = safe_log(model.trans(i, j));
  }
};

/// Scratch buffers for one sequence; reused across sequences to avoid
/// reallocation inside the training loop.
struct FbWorkspace {
  std::vector<double> log_emit;   // T x N
  std::vector<double> log_alpha;  // T x N
  std::vector<double> log_beta;   // T x N
  std::vector<double> scratch;    // N
  double ll_forward = 0.0;
  double ll_backward = 0.0;

  void run(const HmmModel& model, const LogParams& lp, const ObservationSequence& obs) {
    const std::size_t n = lp.n;
    const std::size_t t_len = obs.size();
    log_emit.resize(t_len * n);
    log_alpha.resize(t_len * n);
    log_beta.resize(t_len * n);
    scratch.resize(n);

    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t d = 0; d < n; ++d) log_emit[t * n + d] = model.emission(d).log_pdf(obs[t]);

    for (std::size_t d = 0; d < n; ++d) log_alpha[d] = lp.log_priors[d] + log_emit[d];
    for (std::size_t t = 1; t < t_len; ++t) {
      const double* prev = &log_alpha[(t - 1) * n];
      double* cur = &log_alpha[t * n];
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) scratch[i] = prev[i] + lp.log_trans[i * n + j];
        cur[j] = log_sum_exp(scratch.data(), n) + log_emit[t * n + j];
      }
    }
    ll_forward = log_sum_exp(&log_alpha[(t_len - 1) * n], n);

    for (std::size_t d = 0; d < n; ++d) log_beta[(t_len - 1) * n + d] = 0.0;
    for (std::size_t t = t_len - 1; t-- > 0;) {
      const double* next_beta = &log_beta[(t + 1) * n];
      const double* next_emit = &log_emit[(t + 1) * n];
      double* cur = &log_beta[t * n];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) scratch[j] = lp.log_trans[i * n + j] + next_emit[j] + next_beta[j];
        cur[i] = log_sum_exp(scratch.data(), n);
      }
    }
    for (std::size_t d = 0; d < n; ++d) scratch[d] = lp.log_priors[d] + log_emit[d] + log_beta[d];
    ll_backward = log_sum_exp(scratch.data(), n);
  }

  /// Normalized posterior of index t into out[0..N).
  void posterior(std::size_t t, std::size_t n, double* out) const noexcept {
    double sum = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      out[d] = std::exp(log_alpha[t * n + d] + log_beta[t * n + d] - ll_forward);
      sum += out[d];
    }
    for (std::size_t d = 0; d < n; ++d) out[d] /= sum;
  }
};

}  // namespace qhmm::detail

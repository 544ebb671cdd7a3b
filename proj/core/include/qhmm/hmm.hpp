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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qhmm/gaussian.hpp"

namespace qhmm {

/// Ordered IQ observations of one shot, one per demodulation segment.
class ObservationSequence {
 public:
  ObservationSequence() = default;
  /// Throws InputError on empty input, non-finite values or dt <= 0.
  ObservationSequence(std::vector<IqPoint> points, double dt_seconds);

  std::span<const IqPoint> points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  const IqPoint& operator[](std::size_t k) const noexcept { return points_[k]; }
  double dt_seconds() const noexcept { return dt_; }
  double duration_seconds() const noexcept { return dt_ * static_cast<double>(points_.size()); }

  /// Segments [begin, begin + count). Throws InputError if empty or out of range.
  ObservationSequence slice(std::size_t begin, std::size_t count) const;
  /// First min(count, size()) segments.
  ObservationSequence prefix(std::size_t count) const;

 private:
  std::vector<IqPoint> points_;
  double dt_ = 0.0;
};

/// N-state hidden Markov model with 2-D Gaussian emissions.
///
/// trans(i, j) is the probability of moving from state i to state j in one
/// segment of length dt_seconds. The model is validated on construction and
/// immutable afterwards.
class HmmModel {
 public:
  HmmModel(std::vector<double> priors, std::vector<double> trans_row_major,
           std::vector<Gaussian2D> emissions, double dt_seconds);

  /// Two-state model with a00 = 1 - a01 and a11 = exp(-dt / t1).
  static HmmModel two_state(const Gaussian2D& ground, const Gaussian2D& excited, double t1_seconds,
                            double gamma01_hz, double dt_seconds,
                            std::vector<double> priors = {0.5, 0.5});

  std::size_t n_states() const noexcept { return priors_.size(); }
  std::span<const double> priors() const noexcept { return priors_; }
  double prior(std::size_t d) const noexcept { return priors_[d]; }
  double trans(std::size_t from, std::size_t to) const noexcept { return trans_[from * n_states() + to]; }
  std::span<const double> trans_row_major() const noexcept { return trans_; }
  const std::vector<Gaussian2D>& emissions() const noexcept { return emissions_; }
  const Gaussian2D& emission(std::size_t d) const noexcept { return emissions_[d]; }
  double dt_seconds() const noexcept { return dt_; }

  HmmModel with_priors(std::vector<double> priors) const;
  HmmModel with_uniform_priors() const;
  /// Relabels states: new state k is old state perm[k].
  HmmModel permuted(std::span<const std::size_t> perm) const;

  friend bool operator==(const HmmModel&, const HmmModel&) = default;

 private:
  std::vector<double> priors_;
  std::vector<double> trans_;
  std::vector<Gaussian2D> emissions_;
  double dt_ = 0.0;
};

/// Posterior state probabilities of one sequence under a model.
struct StatePosterior {
  std::size_t n_states = 0;
  std::vector<double> gamma;  ///< row-major T x n_states
  double log_likelihood = 0.0;           ///< from the forward pass
  double backward_log_likelihood = 0.0;  ///< same quantity from the backward pass
  std::vector<std::size_t> path;         ///< argmax of each gamma row, ties to the lowest index
  std::vector<std::size_t> transition_indices;

  std::size_t length() const noexcept { return path.size(); }
  double at(std::size_t index, std::size_t state) const noexcept { return gamma[index * n_states + state]; }
};

StatePosterior forward_backward(const HmmModel& model, const ObservationSequence& obs);
double sequence_loglik(const HmmModel& model, const ObservationSequence& obs);

/// T1 from the excited-state survival element: -dt / ln(a11).
/// Throws DomainError unless 0 < a11 < 1.
double extract_t1_eff(const HmmModel& model);
/// Heating rate a01 / dt in Hz.
double extract_excitation_rate(const HmmModel& model);

// ---------------------------------------------------------------------------
// Baum-Welch

enum class InitKind {
  kLabeledMeans,  ///< per-class moments of the first segment of each labeled shot
  kKMeans,        ///< k-means++ on pooled segments, ordered by cluster size
  kFromModel,     ///< warm start from a given model
};

struct InitStrategy {
  InitKind kind = InitKind::kLabeledMeans;
  std::vector<int> labels;              ///< one per sequence, for kLabeledMeans
  double t1_guess_seconds = 10e-6;      ///< initial a_ii = exp(-dt / t1_guess) for i > 0
  double leak_guess = 1e-4;             ///< initial total off-diagonal mass of row 0
  std::uint64_t seed = 0;               ///< kmeans seeding
  std::optional<HmmModel> model;        ///< for kFromModel

  static InitStrategy labeled(std::vector<int> labels);
  static InitStrategy kmeans(std::uint64_t seed);
  static InitStrategy from(HmmModel model);
};

struct BaumWelchOptions {
  double tol = 1e-6;          ///< relative total log-likelihood improvement
  std::size_t max_iter = 1000;
  std::size_t threads = 1;    ///< E-step workers; results do not depend on this
  bool learn_priors = true;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double log_likelihood = 0.0;  ///< total over all sequences, before the M-step
  bool covariance_clamped = false;
};

struct BaumWelchResult {
  HmmModel model;
  std::vector<IterationRecord> log;
  bool converged = false;
};

/// Unsupervised maximum-likelihood training over a set of sequences sharing dt.
BaumWelchResult baum_welch(std::span<const ObservationSequence> data, std::size_t n_states,
                           const InitStrategy& init, const BaumWelchOptions& options = {});

/// Initial model used by baum_welch; exposed for tests and tooling.
HmmModel initial_model(std::span<const ObservationSequence> data, std::size_t n_states,
                       const InitStrategy& init);

}  // namespace qhmm

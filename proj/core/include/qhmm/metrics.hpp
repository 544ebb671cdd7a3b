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

#include "json.hpp"
#include "qhmm/gaussian.hpp"
#include "qhmm/hmm.hpp"

namespace qhmm {

/// counts(assigned, prepared): number of shots prepared in `prepared` and
/// labeled `assigned`.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_states = 2) : n_(n_states), counts_(n_states * n_states, 0) {}

  void add(std::size_t prepared, std::size_t assigned, std::uint64_t count = 1);
  std::uint64_t counts(std::size_t assigned, std::size_t prepared) const { return counts_.at(assigned * n_ + prepared); }
  std::uint64_t column_sum(std::size_t prepared) const;
  /// P(assigned | prepared). Throws InputError for an empty column.
  double probability(std::size_t assigned, std::size_t prepared) const;
  std::size_t n_states() const noexcept { return n_; }

  nlohmann::json to_json() const;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

/// 1 - (P(0|1) + P(1|0)) / 2 for a two-state matrix.
double assignment_fidelity(const ConfusionMatrix& cm);
/// Excited-state assignment fidelity 1 - P(0|1).
double excited_assignment_fidelity(const ConfusionMatrix& cm);
/// 1 - assignment_fidelity.
double total_classification_error(const ConfusionMatrix& cm);

/// (1 + erf(sqrt(r / 8))) / 2. Throws DomainError for r < 0.
double ideal_fidelity(double r);
/// Inverse of ideal_fidelity on [0.5, 1).
double separation_for_fidelity(double fidelity);

struct Projection {
  std::vector<double> s0;
  std::vector<double> s1;
  IqPoint axis;      // unit vector from centroid 0 to centroid 1
  IqPoint midpoint;  // midpoint of the centroids
};

/// Projects both clouds onto the unit axis joining their centroids, measured
/// from the centroid midpoint. Throws DomainError when the centroids coincide.
Projection project_onto_centroid_axis(std::span<const IqPoint> points0, std::span<const IqPoint> points1);

enum class FitMode { kSingle, kDouble };

struct ProjectedFit {
  double mu0 = 0.0;
  double mu1 = 0.0;
  double sigma = 0.0;  ///< shared standard deviation
  /// weights[k] = mixture weights of distribution k over components (mu0, mu1);
  /// identity for single fits.
  double weights[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
  double r_value = 0.0;  ///< (mu0 - mu1)^2 / sigma^2
  double fit_log_likelihood = 0.0;
  double pooled_variance = 0.0;  ///< per-distribution sample variances, pooled
  double r_value_pooled = 0.0;   ///< separation of sample means over pooled variance
  bool weight_clamped = false;   ///< a mixture weight fell below 1e-6
  std::size_t iterations = 0;
  std::vector<double> log_likelihood_trace;  ///< EM trace (double mode)

  double fidelity() const { return ideal_fidelity(r_value); }
};

/// Maximum-likelihood equal-variance fit of the projected distributions.
/// Single: one Gaussian per distribution. Double: each distribution is a
/// two-component mixture over shared (mu0, mu1, sigma) with its own weights,
/// fitted by EM to relative tolerance 1e-9. Each input needs >= 10 samples.
ProjectedFit fit_equal_variance_gaussians(std::span<const double> s0, std::span<const double> s1, FitMode mode);

struct FidelityUncertainty {
  double fidelity_std = 0.0;
  double r_std = 0.0;
  std::size_t draws = 0;
};

/// Nonparametric bootstrap (resample both inputs with replacement) of a fit's
/// fidelity. Draw k uses stream derive_seed(seed, k).
FidelityUncertainty bootstrap_fit_fidelity(std::span<const double> s0, std::span<const double> s1, FitMode mode,
                                           std::size_t n_draws, std::uint64_t seed);

struct FilteredSection {
  std::size_t state = 0;
  IqPoint mean;
  std::size_t begin = 0;
  std::size_t length = 0;
};

/// Splits a shot at every decoded transition and demodulates each constant
/// run separately (mean segment IQ of the run).
std::vector<FilteredSection> hmm_filtered_demodulate(const ObservationSequence& shot, const StatePosterior& posterior);

/// {fidelity_assignment, fidelity_ideal, r_value, confusion, fit, errors}.
nlohmann::json metrics_report(const ConfusionMatrix& cm, const std::optional<ProjectedFit>& fit,
                              const nlohmann::json& errors = nlohmann::json::object());

}  // namespace qhmm

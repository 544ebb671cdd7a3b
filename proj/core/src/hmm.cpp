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

#include "qhmm/hmm.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fb_kernel.hpp"
#include "qhmm/error.hpp"

namespace qhmm {

ObservationSequence::ObservationSequence(std::vector<IqPoint> points, double dt_seconds)
    : points_(std::move(points)), dt_(dt_seconds) {
  if (points_.empty()) throw InputError("ObservationSequence: empty sequence");
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw InputError("ObservationSequence: dt must be positive");
  for (const auto& p : points_) {
    if (!std::isfinite(p.i) || !std::isfinite(p.q)) {
      throw InputError("ObservationSequence: non-finite observation");
    }
  }
}

ObservationSequence ObservationSequence::slice(std::size_t begin, std::size_t count) const {
  if (count == 0 || begin + count > points_.size()) {
    throw InputError("ObservationSequence::slice: window [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside sequence of " +
                     std::to_string(points_.size()));
  }
  return {std::vector<IqPoint>(points_.begin() + static_cast<std::ptrdiff_t>(begin),
                               points_.begin() + static_cast<std::ptrdiff_t>(begin + count)),
          dt_};
}

ObservationSequence ObservationSequence::prefix(std::size_t count) const {
  return slice(0, std::min(count, points_.size()));
}

namespace {

void check_distribution(std::span<const double> p, const char* what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError(std::string("HmmModel: ") + what + " entry outside [0,1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InputError(std::string("HmmModel: ") + what + " does not sum to 1");
  }
}

}  // namespace

HmmModel::HmmModel(std::vector<double> priors, std::vector<double> trans_row_major,
                   std::vector<Gaussian2D> emissions, double dt_seconds)
    : priors_(std::move(priors)),
      trans_(std::move(trans_row_major)),
      emissions_(std::move(emissions)),
      dt_(dt_seconds) {
  const std::size_t n = priors_.size();
  if (n < 2) throw InputError("HmmModel: need at least two states");
  if (emissions_.size() != n) throw InputError("HmmModel: emissions length differs from n_states");
  if (trans_.size() != n * n) throw InputError("HmmModel: transition matrix must be n_states x n_states");
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw InputError("HmmModel: dt must be positive");
  check_distribution(priors_, "priors");
  for (std::size_t i = 0; i < n; ++i) {
    check_distribution(std::span<const double>(trans_).subspan(i * n, n), "transition row");
  }
}

HmmModel HmmModel::two_state(const Gaussian2D& ground, const Gaussian2D& excited, double t1_seconds,
                             double gamma01_hz, double dt_seconds, std::vector<double> priors) {
  if (!(t1_seconds > 0.0)) throw InputError("two_state: T1 must be positive");
  const double a01 = gamma01_hz * dt_seconds;
  if (!(a01 >= 0.0 && a01 < 1.0)) throw InputError("two_state: excitation probability per segment outside [0,1)");
  const double a11 = std::isinf(t1_seconds) ? 1.0 : std::exp(-dt_seconds / t1_seconds);
  return HmmModel(std::move(priors), {1.0 - a01, a01, 1.0 - a11, a11}, {ground, excited}, dt_seconds);
}

HmmModel HmmModel::with_priors(std::vector<double> priors) const {
  return HmmModel(std::move(priors), trans_, emissions_, dt_);
}

HmmModel HmmModel::with_uniform_priors() const {
  return with_priors(std::vector<double>(n_states(), 1.0 / static_cast<double>(n_states())));
}

HmmModel HmmModel::permuted(std::span<const std::size_t> perm) const {
  const std::size_t n = n_states();
  if (perm.size() != n) throw InputError("HmmModel::permuted: permutation size mismatch");
  std::vector<double> priors(n), trans(n * n);
  std::vector<Gaussian2D> emissions;
  emissions.reserve(n);
  for (std::size_t a = 0; a < n; ++a) {
    priors[a] = priors_[perm[a]];
    emissions.push_back(emissions_[perm[a]]);
    for (std::size_t b = 0; b < n; ++b) trans[a * n + b] = trans_[perm[a] * n + perm[b]];
  }
  return HmmModel(std::move(priors), std::move(trans), std::move(emissions), dt_);
}

namespace {

void check_compatible(const HmmModel& model, const ObservationSequence& obs, const char* who) {
  if (obs.size() == 0) throw InputError(std::string(who) + ": empty observation sequence");
  if (std::abs(obs.dt_seconds() - model.dt_seconds()) > 1e-9 * model.dt_seconds()) {
    throw InputError(std::string(who) + ": sequence dt " + std::to_string(obs.dt_seconds()) +
                     " s does not match model dt " + std::to_string(model.dt_seconds()) + " s");
  }
}

}  // namespace

StatePosterior forward_backward(const HmmModel& model, const ObservationSequence& obs) {
  check_compatible(model, obs, "forward_backward");
  const std::size_t n = model.n_states();
  const std::size_t t_len = obs.size();
  detail::LogParams lp(model);
  detail::FbWorkspace ws;
  ws.run(model, lp, obs);

  StatePosterior post;
  post.n_states = n;
  post.log_likelihood = ws.ll_forward;
  post.backward_log_likelihood = ws.ll_backward;
  post.gamma.resize(t_len * n);
  post.path.resize(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    double* row = &post.gamma[t * n];
    ws.posterior(t, n, row);
    std::size_t best = 0;
    for (std::size_t d = 1; d < n; ++d) {
      if (row[d] > row[best]) best = d;
    }
    post.path[t] = best;
    if (t > 0 && post.path[t] != post.path[t - 1]) post.transition_indices.push_back(t);
  }
  return post;
}

double sequence_loglik(const HmmModel& model, const ObservationSequence& obs) {
  check_compatible(model, obs, "sequence_loglik");
  detail::LogParams lp(model);
  detail::FbWorkspace ws;
  ws.run(model, lp, obs);
  return ws.ll_forward;
}

double extract_t1_eff(const HmmModel& model) {
  if (model.n_states() != 2) throw InputError("extract_t1_eff: requires a two-state model");
  const double a11 = model.trans(1, 1);
  if (!(a11 > 0.0 && a11 < 1.0)) {
    throw DomainError("extract_t1_eff: a11 = " + std::to_string(a11) + " carries no decay information");
  }
  return -model.dt_seconds() / std::log(a11);
}

double extract_excitation_rate(const HmmModel& model) {
  if (model.n_states() != 2) throw InputError("extract_excitation_rate: requires a two-state model");
  return model.trans(0, 1) / model.dt_seconds();
}

}  // namespace qhmm

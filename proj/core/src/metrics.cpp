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

#include "qhmm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qhmm/error.hpp"
#include "qhmm/rng.hpp"

namespace qhmm {

void ConfusionMatrix::add(std::size_t prepared, std::size_t assigned, std::uint64_t count) {
  if (prepared >= n_ || assigned >= n_) throw InputError("ConfusionMatrix::add: label out of range");
  counts_[assigned * n_ + prepared] += count;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t prepared) const {
  std::uint64_t s = 0;
  for (std::size_t a = 0; a < n_; ++a) s += counts_.at(a * n_ + prepared);
  return s;
}

double ConfusionMatrix::probability(std::size_t assigned, std::size_t prepared) const {
  const std::uint64_t total = column_sum(prepared);
  if (total == 0) throw InputError("confusion matrix column " + std::to_string(prepared) + " is empty");
  return static_cast<double>(counts(assigned, prepared)) / static_cast<double>(total);
}

nlohmann::json ConfusionMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t a = 0; a < n_; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < n_; ++p) row.push_back(counts(a, p));
    rows.push_back(row);
  }
  return rows;
}

double assignment_fidelity(const ConfusionMatrix& cm) {
  if (cm.n_states() != 2) throw InputError("assignment_fidelity: two-state confusion matrix required");
  return 1.0 - 0.5 * (cm.probability(0, 1) + cm.probability(1, 0));
}

double excited_assignment_fidelity(const ConfusionMatrix& cm) {
  if (cm.n_states() != 2) throw InputError("excited_assignment_fidelity: two-state confusion matrix required");
  return 1.0 - cm.probability(0, 1);
}

double total_classification_error(const ConfusionMatrix& cm) { return 1.0 - assignment_fidelity(cm); }

double ideal_fidelity(double r) {
  if (!(r >= 0.0)) throw DomainError("ideal_fidelity: separation r must be >= 0");
  return 0.5 * (1.0 + std::erf(std::sqrt(r / 8.0)));
}

double separation_for_fidelity(double fidelity) {
  if (!(fidelity >= 0.5 && fidelity < 1.0)) throw DomainError("separation_for_fidelity: fidelity must be in [0.5, 1)");
  double lo = 0.0, hi = 1.0;
  while (ideal_fidelity(hi) < fidelity) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ideal_fidelity(mid) < fidelity ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Projection project_onto_centroid_axis(std::span<const IqPoint> points0, std::span<const IqPoint> points1) {
  if (points0.empty() || points1.empty()) throw InputError("project_onto_centroid_axis: empty point set");
  auto centroid = [](std::span<const IqPoint> pts) {
    double si = 0.0, sq = 0.0;
    for (const auto& p : pts) {
      si += p.i;
      sq += p.q;
    }
    return IqPoint{si / static_cast<double>(pts.size()), sq / static_cast<double>(pts.size())};
  };
  const IqPoint c0 = centroid(points0);
  const IqPoint c1 = centroid(points1);
  const double len = std::hypot(c1.i - c0.i, c1.q - c0.q);
  if (!(len > 0.0)) throw DomainError("project_onto_centroid_axis: centroids coincide");
  Projection out;
  out.axis = {(c1.i - c0.i) / len, (c1.q - c0.q) / len};
  out.midpoint = {0.5 * (c0.i + c1.i), 0.5 * (c0.q + c1.q)};
  auto project = [&](std::span<const IqPoint> pts, std::vector<double>& s) {
    s.reserve(pts.size());
    for (const auto& p : pts) s.push_back((p.i - out.midpoint.i) * out.axis.i + (p.q - out.midpoint.q) * out.axis.q);
  };
  project(points0, out.s0);
  project(points1, out.s1);
  return out;
}

namespace {

double mean_of(std::span<const double> s) {
  double m = 0.0;
  for (double v : s) m += v;
  return m / static_cast<double>(s.size());
}

double sum_sq_dev(std::span<const double> s, double m) {
  double v = 0.0;
  for (double x : s) v += (x - m) * (x - m);
  return v;
}

double normal_logpdf(double x, double mu, double log_norm, double inv_var) {
  const double d = x - mu;
  return log_norm - 0.5 * d * d * inv_var;
}

void fill_pooled(ProjectedFit& fit, std::span<const double> s0, std::span<const double> s1) {
  const double m0 = mean_of(s0), m1 = mean_of(s1);
  const double dof = static_cast<double>(s0.size() + s1.size()) - 2.0;
  fit.pooled_variance = (sum_sq_dev(s0, m0) + sum_sq_dev(s1, m1)) / dof;
  fit.r_value_pooled = fit.pooled_variance > 0.0 ? (m0 - m1) * (m0 - m1) / fit.pooled_variance : 0.0;
}

double separation(double mu0, double mu1, double sigma) {
  return sigma > 0.0 ? (mu0 - mu1) * (mu0 - mu1) / (sigma * sigma) : 0.0;
}

}  // namespace

ProjectedFit fit_equal_variance_gaussians(std::span<const double> s0, std::span<const double> s1, FitMode mode) {
  if (s0.size() < 10 || s1.size() < 10) throw InputError("fit_equal_variance_gaussians: need >= 10 samples each");
  ProjectedFit fit;
  fill_pooled(fit, s0, s1);
  const double n0 = static_cast<double>(s0.size()), n1 = static_cast<double>(s1.size());
  const double n_total = n0 + n1;

  fit.mu0 = mean_of(s0);
  fit.mu1 = mean_of(s1);
  double var = (sum_sq_dev(s0, fit.mu0) + sum_sq_dev(s1, fit.mu1)) / n_total;
  if (!(var > 0.0)) var = std::numeric_limits<double>::min();

  auto single_ll = [&](double v) {
    return -0.5 * n_total * (std::log(2.0 * std::numbers::pi * v) + 1.0);
  };

  if (mode == FitMode::kSingle) {
    fit.sigma = std::sqrt(var);
    fit.r_value = separation(fit.mu0, fit.mu1, fit.sigma);
    fit.fit_log_likelihood = single_ll(var);
    fit.iterations = 1;
    return fit;
  }

  // Double-Gaussian EM. Components c = 0, 1 share sigma; distribution k has
  // weights w[k][c].
  double w[2][2] = {{0.95, 0.05}, {0.05, 0.95}};
  double mu[2] = {fit.mu0, fit.mu1};
  const std::span<const double> dist[2] = {s0, s1};
  double prev_ll = -std::numeric_limits<double>::infinity();
  constexpr std::size_t kMaxIter = 100000;
  constexpr double kTol = 1e-9;
  constexpr double kWeightFloor = 1e-300;
  std::size_t iter = 0;
  for (; iter < kMaxIter; ++iter) {
    const double inv_var = 1.0 / var;
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
    double ll = 0.0;
    double resp_w[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    double sum_r[2] = {0.0, 0.0}, sum_rx[2] = {0.0, 0.0}, sum_rxx[2] = {0.0, 0.0};
    for (int k = 0; k < 2; ++k) {
      const double lw0 = std::log(std::max(w[k][0], kWeightFloor));
      const double lw1 = std::log(std::max(w[k][1], kWeightFloor));
      for (double x : dist[k]) {
        const double a = lw0 + normal_logpdf(x, mu[0], log_norm, inv_var);
        const double b = lw1 + normal_logpdf(x, mu[1], log_norm, inv_var);
        const double m = std::max(a, b);
        const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
        ll += lse;
        const double r0 = std::exp(a - lse);
        const double r1 = std::exp(b - lse);
        resp_w[k][0] += r0;
        resp_w[k][1] += r1;
        sum_r[0] += r0;
        sum_r[1] += r1;
        sum_rx[0] += r0 * x;
        sum_rx[1] += r1 * x;
        sum_rxx[0] += r0 * x * x;
        sum_rxx[1] += r1 * x * x;
      }
    }
    fit.log_likelihood_trace.push_back(ll);
    fit.fit_log_likelihood = ll;
    if (iter > 0 && (ll - prev_ll) / std::abs(prev_ll) < kTol) break;
    prev_ll = ll;
    for (int k = 0; k < 2; ++k) {
      const double nk = k == 0 ? n0 : n1;
      w[k][0] = resp_w[k][0] / nk;
      w[k][1] = resp_w[k][1] / nk;
    }
    double ss = 0.0;
    for (int c = 0; c < 2; ++c) {
      if (sum_r[c] > 0.0) mu[c] = sum_rx[c] / sum_r[c];
      ss += sum_rxx[c] - 2.0 * mu[c] * sum_rx[c] + mu[c] * mu[c] * sum_r[c];
    }
    var = std::max(ss / n_total, std::numeric_limits<double>::min());
  }
  fit.iterations = iter + 1;
  fit.mu0 = mu[0];
  fit.mu1 = mu[1];
  fit.sigma = std::sqrt(var);
  fit.r_value = separation(mu[0], mu[1], fit.sigma);
  for (int k = 0; k < 2; ++k) {
    for (int c = 0; c < 2; ++c) {
      if (w[k][c] < 1e-6) {
        w[k][c] = 1e-6;
        fit.weight_clamped = true;
      }
    }
    const double s = w[k][0] + w[k][1];
    fit.weights[k][0] = w[k][0] / s;
    fit.weights[k][1] = w[k][1] / s;
  }
  return fit;
}

FidelityUncertainty bootstrap_fit_fidelity(std::span<const double> s0, std::span<const double> s1, FitMode mode,
                                           std::size_t n_draws, std::uint64_t seed) {
  FidelityUncertainty out;
  out.draws = n_draws;
  if (n_draws < 2) return out;
  std::vector<double> fid(n_draws), r(n_draws);
  std::vector<double> b0(s0.size()), b1(s1.size());
  for (std::size_t d = 0; d < n_draws; ++d) {
    Rng rng(seed, d);
    for (auto& v : b0) v = s0[rng.uniform_index(s0.size())];
    for (auto& v : b1) v = s1[rng.uniform_index(s1.size())];
    const ProjectedFit f = fit_equal_variance_gaussians(b0, b1, mode);
    fid[d] = f.fidelity();
    r[d] = f.r_value;
  }
  auto stdev = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  out.fidelity_std = stdev(fid);
  out.r_std = stdev(r);
  return out;
}

std::vector<FilteredSection> hmm_filtered_demodulate(const ObservationSequence& shot, const StatePosterior& posterior) {
  if (posterior.length() != shot.size()) {
    throw InputError("hmm_filtered_demodulate: posterior length differs from shot length");
  }
  std::vector<FilteredSection> out;
  std::size_t begin = 0;
  const std::size_t t_len = shot.size();
  for (std::size_t t = 1; t <= t_len; ++t) {
    if (t == t_len || posterior.path[t] != posterior.path[begin]) {
      double si = 0.0, sq = 0.0;
      for (std::size_t k = begin; k < t; ++k) {
        si += shot[k].i;
        sq += shot[k].q;
      }
      const auto len = static_cast<double>(t - begin);
      out.push_back({posterior.path[begin], {si / len, sq / len}, begin, t - begin});
      begin = t;
    }
  }
  return out;
}

nlohmann::json metrics_report(const ConfusionMatrix& cm, const std::optional<ProjectedFit>& fit,
                              const nlohmann::json& errors) {
  nlohmann::json doc;
  doc["fidelity_assignment"] = assignment_fidelity(cm);
  doc["confusion"] = cm.to_json();
  if (fit) {
    doc["fidelity_ideal"] = fit->fidelity();
    doc["r_value"] = fit->r_value;
    doc["fit"] = {{"mu0", fit->mu0},
                  {"mu1", fit->mu1},
                  {"sigma", fit->sigma},
                  {"weights", {{fit->weights[0][0], fit->weights[0][1]}, {fit->weights[1][0], fit->weights[1][1]}}},
                  {"pooled_variance", fit->pooled_variance},
                  {"r_value_pooled", fit->r_value_pooled},
                  {"weight_clamped", fit->weight_clamped}};
  } else {
    doc["fidelity_ideal"] = nullptr;
    doc["r_value"] = nullptr;
    doc["fit"] = nullptr;
  }
  doc["errors"] = errors;
  return doc;
}

}  // namespace qhmm

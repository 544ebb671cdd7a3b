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

#include <algorithm>
#include <limits>
#include <numbers>
#include <string>

#include "qhmm/error.hpp"

namespace qhmm {

std::array<double, 2> Cov2::eigenvalues() const noexcept {
  const double mean = 0.5 * (ii + qq);
  const double half_diff = 0.5 * (ii - qq);
  const double radius = std::hypot(half_diff, iq);
  return {mean - radius, mean + radius};
}

Cov2 clamp_covariance(const Cov2& cov, double floor, bool* clamped) {
  const auto [lo, hi] = cov.eigenvalues();
  if (lo >= floor) {
    if (clamped) *clamped = false;
    return cov;
  }
  if (clamped) *clamped = true;
  const double new_lo = std::max(lo, floor);
  const double new_hi = std::max(hi, floor);
  // Eigenvector of the larger eigenvalue; isotropic input keeps its axes.
  double vi = cov.iq;
  double vq = hi - cov.ii;
  double norm = std::hypot(vi, vq);
  if (norm == 0.0) {
    vi = cov.ii >= cov.qq ? 1.0 : 0.0;
    vq = 1.0 - vi;
    norm = 1.0;
  }
  vi /= norm;
  vq /= norm;
  // cov = new_hi v v^T + new_lo (I - v v^T)
  const double d = new_hi - new_lo;
  return {new_lo + d * vi * vi, d * vi * vq, new_lo + d * vq * vq};
}

double variance_floor(std::span<const IqPoint> points) {
  if (points.empty()) return 1e-12;
  double lo_i = points[0].i, hi_i = points[0].i;
  double lo_q = points[0].q, hi_q = points[0].q;
  for (const auto& p : points) {
    lo_i = std::min(lo_i, p.i);
    hi_i = std::max(hi_i, p.i);
    lo_q = std::min(lo_q, p.q);
    hi_q = std::max(hi_q, p.q);
  }
  const double range = std::max(hi_i - lo_i, hi_q - lo_q);
  const double floor = 1e-12 * range * range;
  return floor > 0.0 ? floor : 1e-12;
}

Gaussian2D::Gaussian2D(IqPoint mean, Cov2 cov) : mean_(mean), cov_(cov) {
  if (!std::isfinite(mean.i) || !std::isfinite(mean.q) || !std::isfinite(cov.ii) ||
      !std::isfinite(cov.iq) || !std::isfinite(cov.qq)) {
    throw InputError("Gaussian2D: non-finite mean or covariance");
  }
  const double det = cov.determinant();
  if (!(cov.ii > 0.0) || !(cov.qq > 0.0) || !(det > 0.0)) {
    throw InputError("Gaussian2D: covariance is not positive definite (det=" + std::to_string(det) + ")");
  }
  inv_ii_ = cov.qq / det;
  inv_iq_ = -cov.iq / det;
  inv_qq_ = cov.ii / det;
  log_norm_ = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det);
  chol_00_ = std::sqrt(cov.ii);
  chol_10_ = cov.iq / chol_00_;
  chol_11_ = std::sqrt(det / cov.ii);
}

double emission_logpdf(const Gaussian2D& g, IqPoint obs) {
  if (!std::isfinite(obs.i) || !std::isfinite(obs.q)) {
    throw InputError("emission_logpdf: non-finite observation");
  }
  return g.log_pdf(obs);
}

}  // namespace qhmm

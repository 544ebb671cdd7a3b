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

#include <array>
#include <cmath>
#include <span>

namespace qhmm {

/// One demodulated (I, Q) observation.
struct IqPoint {
  double i = 0.0;
  double q = 0.0;

  friend bool operator==(const IqPoint&, const IqPoint&) = default;
};

/// Symmetric 2x2 covariance, stored as its three free entries.
struct Cov2 {
  double ii = 1.0;
  double iq = 0.0;
  double qq = 1.0;

  double determinant() const noexcept { return ii * qq - iq * iq; }
  std::array<double, 2> eigenvalues() const noexcept;  // ascending

  friend bool operator==(const Cov2&, const Cov2&) = default;
};

/// Clamps the eigenvalues of `cov` to at least `floor`. Sets *clamped when
/// any eigenvalue was raised.
Cov2 clamp_covariance(const Cov2& cov, double floor, bool* clamped = nullptr);

/// Variance floor for a set of points: 1e-12 times the squared largest
/// coordinate range, with an absolute fallback for fully degenerate input.
double variance_floor(std::span<const IqPoint> points);

/// Bivariate normal density with full covariance.
///
/// The inverse covariance and log-normalizer are cached at construction so
/// log_pdf is a handful of multiply-adds.
class Gaussian2D {
 public:
  /// Throws InputError if cov is not symmetric positive definite or any
  /// entry is non-finite.
  Gaussian2D(IqPoint mean, Cov2 cov);

  const IqPoint& mean() const noexcept { return mean_; }
  const Cov2& cov() const noexcept { return cov_; }

  double log_pdf(IqPoint x) const noexcept {
    const double di = x.i - mean_.i;
    const double dq = x.q - mean_.q;
    const double maha = di * (inv_ii_ * di + 2.0 * inv_iq_ * dq) + dq * inv_qq_ * dq;
    return log_norm_ - 0.5 * maha;
  }

  double mahalanobis_sq(IqPoint x) const noexcept { return 2.0 * (log_norm_ - log_pdf(x)); }

  /// Draws one sample using the Cholesky factor of cov; z0, z1 are standard normals.
  IqPoint transform_standard(double z0, double z1) const noexcept {
    return {mean_.i + chol_00_ * z0, mean_.q + chol_10_ * z0 + chol_11_ * z1};
  }

  friend bool operator==(const Gaussian2D& a, const Gaussian2D& b) {
    return a.mean_ == b.mean_ && a.cov_ == b.cov_;
  }

 private:
  IqPoint mean_;
  Cov2 cov_;
  double inv_ii_ = 1.0, inv_iq_ = 0.0, inv_qq_ = 1.0;
  double log_norm_ = 0.0;
  double chol_00_ = 1.0, chol_10_ = 0.0, chol_11_ = 1.0;
};

/// Log density of g at obs. Throws InputError for non-finite obs.
double emission_logpdf(const Gaussian2D& g, IqPoint obs);

}  // namespace qhmm

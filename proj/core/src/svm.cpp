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

// Linear C-SVM trained in the dual with SMO (second-order working-set
// selection). The kernel is the plain dot product of standardized 2-D
// features, so w is kept explicitly and gradients are O(n) to refresh.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qhmm/classifiers.hpp"
#include "qhmm/error.hpp"

namespace qhmm {

namespace {

constexpr double kTau = 1e-12;

struct Problem {
  std::vector<double> x0, x1;
  std::vector<double> y;  // +-1
  double c = 1.0;

  std::size_t size() const noexcept { return y.size(); }
  double dot(std::size_t a, std::size_t b) const noexcept { return x0[a] * x0[b] + x1[a] * x1[b]; }
};

// Bias minimizing the hinge sum for fixed w; returns {bias, primal}.
std::pair<double, double> best_bias(const Problem& p, const double w[2]) {
  const std::size_t n = p.size();
  // Term i is active while y_i b < y_i - f_i; breakpoint at b = y_i - f_i.
  std::vector<std::pair<double, double>> bp(n);
  double slope = 0.0;  // slope of the hinge sum as b -> -inf
  for (std::size_t i = 0; i < n; ++i) {
    const double f = w[0] * p.x0[i] + w[1] * p.x1[i];
    bp[i] = {p.y[i] - f, p.y[i]};
    if (p.y[i] > 0) slope -= 1.0;
  }
  std::sort(bp.begin(), bp.end());
  double b = bp.empty() ? 0.0 : bp.front().first;
  for (const auto& [at, yi] : bp) {
    b = at;
    slope += 1.0;  // a +1 term stops decreasing or a -1 term starts increasing
    (void)yi;
    if (slope >= 0.0) break;
  }
  double hinge = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = w[0] * p.x0[i] + w[1] * p.x1[i];
    hinge += std::max(0.0, 1.0 - p.y[i] * (f + b));
  }
  const double primal = 0.5 * (w[0] * w[0] + w[1] * w[1]) + p.c * hinge;
  return {b, primal};
}

}  // namespace

SvmClassifier svm_train(std::span<const LabeledPoint> points, double c_param, const SvmOptions& options) {
  if (!(c_param > 0.0)) throw InputError("svm_train: C must be positive");
  if (points.empty()) throw InputError("svm_train: no training points");
  int lo = points[0].label, hi = points[0].label;
  for (const auto& p : points) {
    lo = std::min(lo, p.label);
    hi = std::max(hi, p.label);
  }
  if (lo == hi) throw InputError("svm_train: training data contains a single class");
  for (const auto& p : points) {
    if (p.label != lo && p.label != hi) throw InputError("svm_train: more than two classes");
  }

  SvmClassifier clf;
  clf.c_param = c_param;
  clf.negative_label = lo;
  clf.positive_label = hi;

  const std::size_t n = points.size();
  double mean[2] = {0.0, 0.0};
  for (const auto& p : points) {
    mean[0] += p.point.i;
    mean[1] += p.point.q;
  }
  mean[0] /= static_cast<double>(n);
  mean[1] /= static_cast<double>(n);
  double var[2] = {0.0, 0.0};
  for (const auto& p : points) {
    var[0] += (p.point.i - mean[0]) * (p.point.i - mean[0]);
    var[1] += (p.point.q - mean[1]) * (p.point.q - mean[1]);
  }
  for (int f = 0; f < 2; ++f) {
    clf.feature_mean[f] = mean[f];
    const double sd = std::sqrt(var[f] / static_cast<double>(n));
    clf.feature_std[f] = sd > 0.0 ? sd : 1.0;
  }

  Problem prob;
  prob.c = c_param;
  prob.x0.resize(n);
  prob.x1.resize(n);
  prob.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    prob.x0[i] = (points[i].point.i - mean[0]) / clf.feature_std[0];
    prob.x1[i] = (points[i].point.q - mean[1]) / clf.feature_std[1];
    prob.y[i] = points[i].label == hi ? 1.0 : -1.0;
  }

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // G = Q alpha - e
  double w[2] = {0.0, 0.0};
  const std::size_t max_iter = options.max_iter ? options.max_iter : std::max<std::size_t>(200 * n, 100000);
  const double c = c_param;

  auto in_up = [&](std::size_t t) { return prob.y[t] > 0 ? alpha[t] < c : alpha[t] > 0.0; };
  auto in_low = [&](std::size_t t) { return prob.y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < c; };

  std::size_t iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  double primal = 0.0;
  double kkt_eps = 1e-3;
  for (; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i_sel = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -prob.y[t] * grad[t] >= gmax) {
        gmax = -prob.y[t] * grad[t];
        i_sel = t;
      }
    }
    double gmin = std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    std::size_t j_sel = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -prob.y[t] * grad[t];
      gmin = std::min(gmin, v);
      if (i_sel == n) continue;
      const double b = gmax - v;
      if (b > 0.0) {
        double a = prob.dot(i_sel, i_sel) + prob.dot(t, t) - 2.0 * prob.dot(i_sel, t);
        if (a <= 0.0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj <= best_obj) {
          best_obj = obj;
          j_sel = t;
        }
      }
    }

    if (i_sel == n || j_sel == n || gmax - gmin < kkt_eps) {
      // KKT satisfied at this tolerance: check the duality gap.
      const auto [bias, p_val] = best_bias(prob, w);
      double sum_alpha = 0.0;
      for (double a : alpha) sum_alpha += a;
      const double dual = sum_alpha - 0.5 * (w[0] * w[0] + w[1] * w[1]);
      primal = p_val;
      gap = p_val - dual;
      clf.bias = bias;
      if (gap <= options.gap_tol * std::max(1.0, std::abs(p_val)) || kkt_eps < 1e-14) break;
      kkt_eps *= 0.1;
      continue;
    }

    const std::size_t i = i_sel, j = j_sel;
    const double yi = prob.y[i], yj = prob.y[j];
    double a = prob.dot(i, i) + prob.dot(j, j) - 2.0 * prob.dot(i, j);
    if (a <= 0.0) a = kTau;
    const double old_ai = alpha[i], old_aj = alpha[j];
    // Move along y_i d_i + y_j d_j = 0.
    const double b = -yi * grad[i] + yj * grad[j];
    double ai = old_ai + yi * b / a;
    double aj = 0.0;
    // Clip to the segment of the constraint line inside the box.
    const double sum = yi * old_ai + yj * old_aj;
    const double s = yi * yj;
    double lo_i = 0.0, hi_i = c;
    if (s > 0) {
      lo_i = std::max(lo_i, yj * sum - c);
      hi_i = std::min(hi_i, yj * sum);
    } else {
      lo_i = std::max(lo_i, -yj * sum);
      hi_i = std::min(hi_i, c - yj * sum);
    }
    ai = std::clamp(ai, lo_i, hi_i);
    aj = std::clamp(yj * sum - s * ai, 0.0, c);

    const double di = ai - old_ai, dj = aj - old_aj;
    alpha[i] = ai;
    alpha[j] = aj;
    w[0] += di * yi * prob.x0[i] + dj * yj * prob.x0[j];
    w[1] += di * yi * prob.x1[i] + dj * yj * prob.x1[j];
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] = prob.y[t] * (w[0] * prob.x0[t] + w[1] * prob.x1[t]) - 1.0;
    }
  }
  if (iter >= max_iter) {
    const auto [bias, p_val] = best_bias(prob, w);
    double sum_alpha = 0.0;
    for (double a : alpha) sum_alpha += a;
    primal = p_val;
    gap = p_val - (sum_alpha - 0.5 * (w[0] * w[0] + w[1] * w[1]));
    clf.bias = bias;
  }
  clf.weights[0] = w[0];
  clf.weights[1] = w[1];
  clf.duality_gap = gap;
  clf.iterations = iter;
  clf.converged = gap <= options.gap_tol * std::max(1.0, std::abs(primal));
  return clf;
}

}  // namespace qhmm

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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fb_kernel.hpp"
#include "qhmm/error.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/parallel.hpp"
#include "qhmm/rng.hpp"

namespace qhmm {

InitStrategy InitStrategy::labeled(std::vector<int> labels) {
  InitStrategy s;
  s.kind = InitKind::kLabeledMeans;
  s.labels = std::move(labels);
  return s;
}

InitStrategy InitStrategy::kmeans(std::uint64_t seed) {
  InitStrategy s;
  s.kind = InitKind::kKMeans;
  s.seed = seed;
  return s;
}

InitStrategy InitStrategy::from(HmmModel model) {
  InitStrategy s;
  s.kind = InitKind::kFromModel;
  s.model = std::move(model);
  return s;
}

namespace {

// Sequences per reduction chunk. Fixed so the summation order never depends
// on the number of workers.
constexpr std::size_t kChunk = 16;

struct Moments {
  double w = 0.0, si = 0.0, sq = 0.0, sii = 0.0, siq = 0.0, sqq = 0.0;

  void add(double weight, double di, double dq) noexcept {
    w += weight;
    si += weight * di;
    sq += weight * dq;
    sii += weight * di * di;
    siq += weight * di * dq;
    sqq += weight * dq * dq;
  }
  void merge(const Moments& o) noexcept {
    w += o.w; si += o.si; sq += o.sq; sii += o.sii; siq += o.siq; sqq += o.sqq;
  }
};

struct DataSummary {
  double floor = 1e-12;
  IqPoint center;
  double dt = 0.0;
};

DataSummary summarize(std::span<const ObservationSequence> data) {
  if (data.empty()) throw InputError("baum_welch: no training sequences");
  DataSummary s;
  s.dt = data[0].dt_seconds();
  double lo_i = std::numeric_limits<double>::infinity(), hi_i = -lo_i, lo_q = lo_i, hi_q = -lo_i;
  double sum_i = 0.0, sum_q = 0.0;
  std::size_t count = 0;
  for (const auto& seq : data) {
    if (seq.size() == 0) throw InputError("baum_welch: empty training sequence");
    if (std::abs(seq.dt_seconds() - s.dt) > 1e-9 * s.dt) {
      throw InputError("baum_welch: training sequences have different dt");
    }
    for (const auto& p : seq.points()) {
      lo_i = std::min(lo_i, p.i);
      hi_i = std::max(hi_i, p.i);
      lo_q = std::min(lo_q, p.q);
      hi_q = std::max(hi_q, p.q);
      sum_i += p.i;
      sum_q += p.q;
    }
    count += seq.size();
  }
  const double range = std::max(hi_i - lo_i, hi_q - lo_q);
  s.floor = range > 0.0 ? 1e-12 * range * range : 1e-12;
  s.center = {sum_i / static_cast<double>(count), sum_q / static_cast<double>(count)};
  return s;
}

Gaussian2D moment_gaussian(const Moments& m, IqPoint center, double floor, bool* clamped) {
  const double mi = m.si / m.w;
  const double mq = m.sq / m.w;
  Cov2 cov{m.sii / m.w - mi * mi, m.siq / m.w - mi * mq, m.sqq / m.w - mq * mq};
  cov = clamp_covariance(cov, floor, clamped);
  return Gaussian2D({center.i + mi, center.q + mq}, cov);
}

std::vector<double> initial_trans(std::size_t n, double dt, double t1_guess, double leak) {
  std::vector<double> trans(n * n, 0.0);
  const double stay = std::isinf(t1_guess) ? 1.0 - leak : std::exp(-dt / t1_guess);
  for (std::size_t i = 0; i < n; ++i) {
    const double diag = i == 0 ? 1.0 - leak : stay;
    const double off = (1.0 - diag) / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < n; ++j) trans[i * n + j] = i == j ? diag : off;
  }
  return trans;
}

std::vector<Gaussian2D> labeled_emissions(std::span<const ObservationSequence> data, std::size_t n,
                                          const std::vector<int>& labels, const DataSummary& summary) {
  if (labels.size() != data.size()) {
    throw InputError("labeled-means init: need one label per sequence");
  }
  std::vector<Moments> moments(n);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const int label = labels[k];
    if (label < 0 || static_cast<std::size_t>(label) >= n) {
      throw InputError("labeled-means init: label " + std::to_string(label) + " outside [0, n_states)");
    }
    const IqPoint p = data[k][0];
    moments[static_cast<std::size_t>(label)].add(1.0, p.i - summary.center.i, p.q - summary.center.q);
  }
  std::vector<Gaussian2D> emissions;
  for (std::size_t d = 0; d < n; ++d) {
    if (moments[d].w < 3.0) {
      throw InputError("labeled-means init: state " + std::to_string(d) + " has fewer than 3 labeled shots");
    }
    emissions.push_back(moment_gaussian(moments[d], summary.center, summary.floor, nullptr));
  }
  return emissions;
}

std::vector<Gaussian2D> kmeans_emissions(std::span<const ObservationSequence> data, std::size_t n,
                                         std::uint64_t seed, const DataSummary& summary) {
  constexpr std::size_t kMaxPoints = 50000;
  constexpr int kIterations = 20;
  std::size_t total = 0;
  for (const auto& seq : data) total += seq.size();
  const std::size_t stride = std::max<std::size_t>(1, total / kMaxPoints);
  std::vector<IqPoint> pts;
  pts.reserve(total / stride + 1);
  std::size_t counter = 0;
  for (const auto& seq : data) {
    for (const auto& p : seq.points()) {
      if (counter++ % stride == 0) pts.push_back(p);
    }
  }
  if (pts.size() < n) throw InputError("kmeans init: fewer points than states");

  auto dist2 = [](IqPoint a, IqPoint b) {
    return (a.i - b.i) * (a.i - b.i) + (a.q - b.q) * (a.q - b.q);
  };
  Rng rng(seed);
  std::vector<IqPoint> centers;
  centers.push_back(pts[rng.uniform_index(pts.size())]);
  std::vector<double> d2(pts.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < n) {
    double total_d2 = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      d2[k] = std::min(d2[k], dist2(pts[k], centers.back()));
      total_d2 += d2[k];
    }
    double target = rng.uniform() * total_d2;
    std::size_t pick = pts.size() - 1;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      target -= d2[k];
      if (target < 0.0) {
        pick = k;
        break;
      }
    }
    centers.push_back(pts[pick]);
  }

  std::vector<std::size_t> assign(pts.size(), 0);
  for (int it = 0; it < kIterations; ++it) {
    for (std::size_t k = 0; k < pts.size(); ++k) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < n; ++c) {
        if (dist2(pts[k], centers[c]) < dist2(pts[k], centers[best])) best = c;
      }
      assign[k] = best;
    }
    std::vector<double> si(n, 0.0), sq(n, 0.0), cnt(n, 0.0);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      si[assign[k]] += pts[k].i;
      sq[assign[k]] += pts[k].q;
      cnt[assign[k]] += 1.0;
    }
    for (std::size_t c = 0; c < n; ++c) {
      if (cnt[c] > 0.0) centers[c] = {si[c] / cnt[c], sq[c] / cnt[c]};
    }
  }

  std::vector<Moments> moments(n);
  Moments pooled;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double di = pts[k].i - summary.center.i;
    const double dq = pts[k].q - summary.center.q;
    moments[assign[k]].add(1.0, di, dq);
    pooled.add(1.0, di, dq);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return moments[a].w > moments[b].w; });
  std::vector<Gaussian2D> emissions;
  for (std::size_t c : order) {
    const Moments& m = moments[c].w >= 3.0 ? moments[c] : pooled;
    emissions.push_back(moment_gaussian(m, summary.center, summary.floor, nullptr));
  }
  return emissions;
}

struct Accumulator {
  double log_likelihood = 0.0;
  std::size_t n_sequences = 0;
  std::vector<double> prior;
  std::vector<double> trans;
  std::vector<Moments> emit;

  explicit Accumulator(std::size_t n) : prior(n, 0.0), trans(n * n, 0.0), emit(n) {}

  void merge(const Accumulator& o) {
    log_likelihood += o.log_likelihood;
    n_sequences += o.n_sequences;
    for (std::size_t k = 0; k < prior.size(); ++k) prior[k] += o.prior[k];
    for (std::size_t k = 0; k < trans.size(); ++k) trans[k] += o.trans[k];
    for (std::size_t k = 0; k < emit.size(); ++k) emit[k].merge(o.emit[k]);
  }
};

void accumulate_sequence(const HmmModel& model, const detail::LogParams& lp, const ObservationSequence& seq,
                         IqPoint center, detail::FbWorkspace& ws, std::vector<double>& gamma,
                         Accumulator& acc) {
  const std::size_t n = lp.n;
  const std::size_t t_len = seq.size();
  ws.run(model, lp, seq);
  const double ll = ws.ll_forward;
  acc.log_likelihood += ll;
  acc.n_sequences += 1;
  gamma.resize(n);
  for (std::size_t t = 0; t < t_len; ++t) {
    ws.posterior(t, n, gamma.data());
    const double di = seq[t].i - center.i;
    const double dq = seq[t].q - center.q;
    for (std::size_t d = 0; d < n; ++d) acc.emit[d].add(gamma[d], di, dq);
    if (t == 0) {
      for (std::size_t d = 0; d < n; ++d) acc.prior[d] += gamma[d];
    }
    if (t + 1 < t_len) {
      const double* alpha = &ws.log_alpha[t * n];
      const double* emit_next = &ws.log_emit[(t + 1) * n];
      const double* beta_next = &ws.log_beta[(t + 1) * n];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          acc.trans[i * n + j] += std::exp(alpha[i] + lp.log_trans[i * n + j] + emit_next[j] + beta_next[j] - ll);
        }
      }
    }
  }
}

}  // namespace

HmmModel initial_model(std::span<const ObservationSequence> data, std::size_t n_states,
                       const InitStrategy& init) {
  if (n_states < 2) throw InputError("baum_welch: n_states must be at least 2");
  const DataSummary summary = summarize(data);
  switch (init.kind) {
    case InitKind::kFromModel: {
      if (!init.model) throw InputError("from-model init: no model given");
      if (init.model->n_states() != n_states) throw InputError("from-model init: state count mismatch");
      return *init.model;
    }
    case InitKind::kLabeledMeans:
      return HmmModel(std::vector<double>(n_states, 1.0 / static_cast<double>(n_states)),
                      initial_trans(n_states, summary.dt, init.t1_guess_seconds, init.leak_guess),
                      labeled_emissions(data, n_states, init.labels, summary), summary.dt);
    case InitKind::kKMeans:
      return HmmModel(std::vector<double>(n_states, 1.0 / static_cast<double>(n_states)),
                      initial_trans(n_states, summary.dt, init.t1_guess_seconds, init.leak_guess),
                      kmeans_emissions(data, n_states, init.seed, summary), summary.dt);
  }
  throw InputError("baum_welch: unknown init strategy");
}

BaumWelchResult baum_welch(std::span<const ObservationSequence> data, std::size_t n_states,
                           const InitStrategy& init, const BaumWelchOptions& options) {
  const DataSummary summary = summarize(data);
  HmmModel model = initial_model(data, n_states, init);
  const std::size_t n = n_states;
  const std::size_t n_chunks = (data.size() + kChunk - 1) / kChunk;

  BaumWelchResult result{model, {}, false};
  bool clamped_last = false;
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    const detail::LogParams lp(model);
    std::vector<Accumulator> chunks(n_chunks, Accumulator(n));
    parallel_for(n_chunks, options.threads, [&](std::size_t c) {
      detail::FbWorkspace ws;
      std::vector<double> gamma;
      const std::size_t end = std::min(data.size(), (c + 1) * kChunk);
      for (std::size_t k = c * kChunk; k < end; ++k) {
        accumulate_sequence(model, lp, data[k], summary.center, ws, gamma, chunks[c]);
      }
    });
    Accumulator acc(n);
    for (const auto& chunk : chunks) acc.merge(chunk);

    if (!std::isfinite(acc.log_likelihood)) {
      throw NumericalError("baum_welch: log-likelihood became non-finite at iteration " + std::to_string(iter));
    }
    result.log.push_back({iter, acc.log_likelihood, clamped_last});
    result.model = model;
    if (iter > 0) {
      const double rel = (acc.log_likelihood - prev_ll) / std::abs(prev_ll);
      if (rel < options.tol) {
        result.converged = true;
        break;
      }
    }
    prev_ll = acc.log_likelihood;

    // M-step
    std::vector<double> priors(model.priors().begin(), model.priors().end());
    if (options.learn_priors) {
      const double total = std::accumulate(acc.prior.begin(), acc.prior.end(), 0.0);
      for (std::size_t d = 0; d < n; ++d) priors[d] = acc.prior[d] / total;
    }
    std::vector<double> trans(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += acc.trans[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        trans[i * n + j] = row > 0.0 ? acc.trans[i * n + j] / row : model.trans(i, j);
      }
    }
    std::vector<Gaussian2D> emissions;
    emissions.reserve(n);
    clamped_last = false;
    for (std::size_t d = 0; d < n; ++d) {
      if (acc.emit[d].w <= 0.0) {
        emissions.push_back(model.emission(d));
        continue;
      }
      bool clamped = false;
      emissions.push_back(moment_gaussian(acc.emit[d], summary.center, summary.floor, &clamped));
      clamped_last = clamped_last || clamped;
    }
    model = HmmModel(std::move(priors), std::move(trans), std::move(emissions), model.dt_seconds());
  }
  return result;
}

}  // namespace qhmm

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

#include "qhmm/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qhmm/error.hpp"
#include "qhmm/model_io.hpp"

namespace qhmm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool near_integer(double x, double tol = 1e-6) { return std::abs(x - std::round(x)) <= tol; }

}  // namespace

void TraceParams::validate() const {
  if (!(sample_rate_hz > 0.0)) throw InputError("TraceParams: sample rate must be positive");
  if (!(sample_rate_hz > 2.0 * if_freq_hz)) {
    throw InputError("TraceParams: sample rate " + std::to_string(sample_rate_hz) +
                     " Hz violates Nyquist for IF " + std::to_string(if_freq_hz) + " Hz");
  }
  if (!(duration_s > 0.0)) throw InputError("TraceParams: duration must be positive");
  if (!(noise_sigma >= 0.0)) throw InputError("TraceParams: noise sigma must be non-negative");
  if (tones.empty()) throw InputError("TraceParams: need at least one state tone");
}

std::size_t segments_in(double seconds, double dt_s) {
  if (!(dt_s > 0.0)) throw InputError("segments_in: dt must be positive");
  if (!(seconds >= 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(seconds / dt_s + 1e-9));
}

std::vector<int> simulate_state_sequence(double t1_eff_s, double gamma01_hz, double dt_s,
                                         std::size_t n_segments, int start_state, Rng& rng) {
  if (!(t1_eff_s > 0.0)) throw InputError("simulate_state_sequence: T1 must be positive");
  if (!(dt_s > 0.0)) throw InputError("simulate_state_sequence: dt must be positive");
  if (n_segments < 1) throw InputError("simulate_state_sequence: need at least one segment");
  if (start_state != 0 && start_state != 1) throw InputError("simulate_state_sequence: start state must be 0 or 1");
  const double p_up = gamma01_hz * dt_s;
  if (!(p_up >= 0.0) || p_up >= 1.0) {
    throw InputError("simulate_state_sequence: excitation probability per segment must lie in [0, 1)");
  }
  const double survival = std::isinf(t1_eff_s) ? 1.0 : std::exp(-dt_s / t1_eff_s);
  std::vector<int> states(n_segments);
  states[0] = start_state;
  for (std::size_t k = 1; k < n_segments; ++k) {
    const double u = rng.uniform();
    if (states[k - 1] == 1) {
      states[k] = u < survival ? 1 : 0;
    } else {
      states[k] = u < p_up ? 1 : 0;
    }
  }
  return states;
}

std::vector<int> simulate_state_sequence(double t1_eff_s, double gamma01_hz, double dt_s,
                                         std::size_t n_segments, int start_state, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_state_sequence(t1_eff_s, gamma01_hz, dt_s, n_segments, start_state, rng);
}

RawTrace synthesize_trace(const TraceParams& params, const std::vector<int>& states, double dt_s) {
  params.validate();
  if (states.empty()) throw InputError("synthesize_trace: empty state sequence");
  if (!(dt_s > 0.0)) throw InputError("synthesize_trace: dt must be positive");
  const double fs = params.sample_rate_hz;
  if (std::abs(static_cast<double>(states.size()) * dt_s - params.duration_s) > 1.0 / fs + 1e-15) {
    throw InputError("synthesize_trace: states x dt does not cover the trace duration");
  }
  for (int s : states) {
    if (s < 0 || static_cast<std::size_t>(s) >= params.tones.size()) {
      throw InputError("synthesize_trace: state " + std::to_string(s) + " has no tone");
    }
  }
  const auto n = static_cast<std::size_t>(std::llround(params.duration_s * fs));
  const double samples_per_segment = dt_s * fs;
  RawTrace trace;
  trace.sample_rate_hz = fs;
  trace.samples.resize(n);
  Rng rng(params.seed);
  for (std::size_t j = 0; j < n; ++j) {
    auto k = static_cast<std::size_t>(std::floor(static_cast<double>(j) / samples_per_segment + 1e-9));
    k = std::min(k, states.size() - 1);
    const StateTone& tone = params.tones[static_cast<std::size_t>(states[k])];
    const double t = static_cast<double>(j) / fs;
    double v = tone.amplitude * std::cos(kTwoPi * params.if_freq_hz * t + tone.phase);
    if (params.noise_sigma > 0.0) v += params.noise_sigma * rng.normal();
    trace.samples[j] = v;
  }
  return trace;
}

Demodulated demodulate_segments(const RawTrace& trace, double if_freq_hz, double dt_s) {
  const double fs = trace.sample_rate_hz;
  if (!(fs > 0.0)) throw InputError("demodulate_segments: sample rate must be positive");
  if (!(dt_s > 0.0)) throw InputError("demodulate_segments: dt must be positive");
  const double m_real = dt_s * fs;
  if (!near_integer(m_real)) {
    throw InputError("demodulate_segments: dt x sample rate = " + std::to_string(m_real) + " is not an integer");
  }
  const auto m = static_cast<std::size_t>(std::llround(m_real));
  if (m < 2) throw InputError("demodulate_segments: need at least 2 samples per segment");
  const std::size_t n_seg = trace.samples.size() / m;
  if (n_seg == 0) throw InputError("demodulate_segments: trace shorter than one segment");

  std::vector<IqPoint> points(n_seg);
  const double scale = 2.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n_seg; ++k) {
    double si = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t j = k * m + r;
      const double phase = kTwoPi * if_freq_hz * (static_cast<double>(j) / fs);
      si += trace.samples[j] * std::cos(phase);
      sq += trace.samples[j] * std::sin(phase);
    }
    points[k] = {scale * si, scale * sq};
  }
  Demodulated out{ObservationSequence(std::move(points), dt_s), m, !near_integer(if_freq_hz * dt_s)};
  return out;
}

IqPoint demodulate_window(const ObservationSequence& obs, double t_int_s, double start_s) {
  const double dt = obs.dt_seconds();
  const std::size_t begin = segments_in(start_s, dt);
  const std::size_t count = segments_in(t_int_s, dt);
  if (count == 0) throw InputError("demodulate_window: integration window shorter than one segment");
  if (begin + count > obs.size()) {
    throw InputError("demodulate_window: window ends after the sequence (" + std::to_string(begin + count) +
                     " > " + std::to_string(obs.size()) + " segments)");
  }
  double si = 0.0, sq = 0.0;
  for (std::size_t k = begin; k < begin + count; ++k) {
    si += obs[k].i;
    sq += obs[k].q;
  }
  const auto c = static_cast<double>(count);
  return {si / c, sq / c};
}

Autocorrelation autocorrelation_minima(const RawTrace& trace, double max_lag_s) {
  const std::size_t n = trace.samples.size();
  if (n < 2) throw InputError("autocorrelation_minima: trace needs at least 2 samples");
  const auto max_lag = static_cast<std::size_t>(std::floor(max_lag_s * trace.sample_rate_hz + 1e-9));
  if (max_lag >= n) throw InputError("autocorrelation_minima: max lag must be shorter than the trace");

  double mean = 0.0;
  for (double v : trace.samples) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = trace.samples[j] - mean;

  Autocorrelation ac;
  ac.lags_s.resize(max_lag + 1);
  ac.acf.resize(max_lag + 1);
  double r0 = 0.0;
  for (double v : x) r0 += v * v;
  if (!(r0 > 0.0)) throw InputError("autocorrelation_minima: constant trace has no autocorrelation");
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double r = 0.0;
    for (std::size_t j = 0; j + k < n; ++j) r += x[j] * x[j + k];
    ac.acf[k] = r / r0;
    ac.lags_s[k] = static_cast<double>(k) / trace.sample_rate_hz;
  }
  for (std::size_t k = 1; k < max_lag; ++k) {
    const double a = std::abs(ac.acf[k]);
    if (a < 0.1 && a < std::abs(ac.acf[k - 1]) && a <= std::abs(ac.acf[k + 1])) {
      ac.minima_lags_s.push_back(ac.lags_s[k]);
    }
  }
  return ac;
}

std::vector<double> candidate_segment_durations(const Autocorrelation& ac, double max_dt_s) {
  const auto& m = ac.minima_lags_s;
  if (m.size() < 2) return {};
  std::vector<double> gaps;
  for (std::size_t k = 1; k < m.size(); ++k) gaps.push_back(m[k] - m[k - 1]);
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
  const double cycle = 2.0 * gaps[gaps.size() / 2];
  std::vector<double> out;
  for (int mult = 1; mult * cycle <= max_dt_s * (1.0 + 1e-12); ++mult) out.push_back(mult * cycle);
  return out;
}

Dataset simulate_iq_dataset(const HmmModel& model, const IqSimulation& sim) {
  if (model.n_states() != 2) throw InputError("simulate_iq_dataset: requires a two-state model");
  if (sim.n_segments < 1) throw InputError("simulate_iq_dataset: need at least one segment");
  if (!(sim.pre_delay_s >= 0.0)) throw InputError("simulate_iq_dataset: pre-readout delay must be >= 0");
  const double a11 = model.trans(1, 1);
  if (!(a11 > 0.0)) throw InputError("simulate_iq_dataset: a11 must be positive");
  const double t1 = a11 >= 1.0 ? std::numeric_limits<double>::infinity() : -model.dt_seconds() / std::log(a11);
  const double dt = model.dt_seconds();
  const double start_survival = std::isinf(t1) ? 1.0 : std::exp(-sim.pre_delay_s / t1);

  Dataset data;
  data.dt_seconds = dt;
  data.seed = sim.seed;
  data.provenance = {{"generator", "simulate_iq_dataset"},
                     {"model", to_json(model)},
                     {"n_ground", sim.n_ground},
                     {"n_excited", sim.n_excited},
                     {"n_segments", sim.n_segments},
                     {"gamma01_hz", sim.gamma01_hz},
                     {"pre_delay_s", sim.pre_delay_s},
                     {"t1_eff_s", std::isinf(t1) ? -1.0 : t1}};
  const std::size_t total = sim.n_ground + sim.n_excited;
  data.shots.reserve(total);
  for (std::size_t id = 0; id < total; ++id) {
    Rng rng(sim.seed, id);
    const bool excited = id >= sim.n_ground;
    const int start = excited && rng.uniform() < start_survival ? 1 : 0;
    std::vector<int> states = simulate_state_sequence(t1, sim.gamma01_hz, dt, sim.n_segments, start, rng);
    std::vector<IqPoint> points(sim.n_segments);
    for (std::size_t k = 0; k < sim.n_segments; ++k) {
      const double z0 = rng.normal();
      const double z1 = rng.normal();
      points[k] = model.emission(static_cast<std::size_t>(states[k])).transform_standard(z0, z1);
    }
    data.shots.push_back({id, excited ? 1 : 0, ObservationSequence(std::move(points), dt), std::move(states)});
  }
  return data;
}

ObservationSequence simulate_trace_shot(const TraceParams& params, const std::vector<int>& states, double dt_s) {
  const RawTrace trace = synthesize_trace(params, states, dt_s);
  return demodulate_segments(trace, params.if_freq_hz, dt_s).obs;
}

double iq_sigma_from_sample_noise(double noise_sigma, std::size_t samples_per_segment) {
  return noise_sigma * std::sqrt(2.0 / static_cast<double>(samples_per_segment));
}

}  // namespace qhmm

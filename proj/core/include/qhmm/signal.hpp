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

#include <cstdint>
#include <vector>

#include "qhmm/dataset.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/rng.hpp"

namespace qhmm {

struct StateTone {
  double amplitude = 1.0;
  double phase = 0.0;  // radians
};

/// Heterodyned readout trace configuration. One tone per hidden state.
struct TraceParams {
  double sample_rate_hz = 2e9;
  double if_freq_hz = 25e6;
  double duration_s = 19.44e-6;
  std::vector<StateTone> tones;
  double noise_sigma = 0.0;  // additive white Gaussian noise per sample
  std::uint64_t seed = 0;

  void validate() const;  // throws InputError
};

/// Two-level Markov chain: 1 -> 1 with probability exp(-dt/T1) per step and
/// 0 -> 1 with probability gamma01 * dt. T1 = +inf means no decay.
std::vector<int> simulate_state_sequence(double t1_eff_s, double gamma01_hz, double dt_s,
                                         std::size_t n_segments, int start_state, Rng& rng);
std::vector<int> simulate_state_sequence(double t1_eff_s, double gamma01_hz, double dt_s,
                                         std::size_t n_segments, int start_state, std::uint64_t seed);

/// samples[j] = A(d) cos(2 pi f_IF t_j + phi(d)) + noise, t_j = j / f_s,
/// where d is the hidden state of the segment containing t_j.
RawTrace synthesize_trace(const TraceParams& params, const std::vector<int>& states, double dt_s);

struct Demodulated {
  ObservationSequence obs;
  std::size_t samples_per_segment = 0;
  bool non_integer_periods = false;  // warning: IF periods per segment not integral
};

/// I_k = (2/M) sum s_j cos(2 pi f t_j), Q_k = (2/M) sum s_j sin(2 pi f t_j)
/// over the M samples of segment k. A trailing partial segment is dropped.
Demodulated demodulate_segments(const RawTrace& trace, double if_freq_hz, double dt_s);

/// Mean of the segment IQ values inside [start, start + t_int), with both
/// edges rounded down to segment boundaries.
IqPoint demodulate_window(const ObservationSequence& obs, double t_int_s, double start_s = 0.0);

/// Number of whole segments covered by `seconds` (rounded down, robust to
/// decimal representation error).
std::size_t segments_in(double seconds, double dt_s);

struct Autocorrelation {
  std::vector<double> lags_s;
  std::vector<double> acf;
  std::vector<double> minima_lags_s;  // local minima of |acf| below 0.1
};

Autocorrelation autocorrelation_minima(const RawTrace& trace, double max_lag_s);

/// Segment durations spanning whole oscillation cycles of the autocorrelation:
/// consecutive |acf| minima are half a cycle apart, so candidates are the
/// multiples of twice their median spacing, up to max_dt_s.
std::vector<double> candidate_segment_durations(const Autocorrelation& ac, double max_dt_s);

struct IqSimulation {
  std::size_t n_ground = 0;
  std::size_t n_excited = 0;
  std::size_t n_segments = 243;
  double gamma01_hz = 0.0;
  /// Time between the excitation pulse and the first observed segment. An
  /// excited shot starts the record in state 1 with probability exp(-delay/T1).
  double pre_delay_s = 0.0;
  std::uint64_t seed = 0;
};

/// Draws IQ shots from a two-state model: excited shots follow the Markov
/// chain with the model's T1 starting in 1, ground shots stay in 0. Shot k
/// uses stream derive_seed(seed, k).
Dataset simulate_iq_dataset(const HmmModel& model, const IqSimulation& sim);

/// Full signal-chain shot: synthesize a raw trace for `states` and
/// demodulate it back to segment IQ values.
ObservationSequence simulate_trace_shot(const TraceParams& params, const std::vector<int>& states, double dt_s);

/// Per-segment IQ standard deviation produced by white sample noise:
/// sigma_iq = sigma * sqrt(2 / M).
double iq_sigma_from_sample_noise(double noise_sigma, std::size_t samples_per_segment);

}  // namespace qhmm

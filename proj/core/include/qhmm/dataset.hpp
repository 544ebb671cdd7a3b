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
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "qhmm/hmm.hpp"

namespace qhmm {

/// Digitized heterodyne voltage record.
struct RawTrace {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;

  double duration_s() const noexcept { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

struct ShotRecord {
  std::size_t shot_id = 0;
  int prepared_label = 0;
  ObservationSequence obs;
  std::vector<int> true_states;  ///< hidden path when simulated; empty when ingested
};

struct Dataset {
  std::vector<ShotRecord> shots;
  double dt_seconds = 80e-9;
  double if_freq_hz = 25e6;
  double sample_rate_hz = 2e9;
  nlohmann::json provenance = nlohmann::json::object();
  std::uint64_t seed = 0;

  std::size_t count_label(int label) const;
  std::vector<ObservationSequence> sequences() const;
  std::vector<int> labels() const;
  /// Shots whose every sequence is cut to its first n_segments segments.
  Dataset truncated(std::size_t n_segments) const;
  /// Shots with the first n_segments segments removed.
  Dataset dropped_front(std::size_t n_segments) const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// Sidecar path for a dataset CSV: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// CSV rows "shot_id,prepared_label,segment_index,i,q" plus the JSON sidecar
/// {dt_seconds, if_freq_hz, sample_rate_hz, provenance, seed}.
std::string dataset_to_csv(const Dataset& data);
void save_dataset(const std::filesystem::path& csv_path, const Dataset& data);
/// Throws SchemaError naming the offending row on malformed input.
Dataset dataset_from_csv(const std::string& csv, const nlohmann::json& sidecar);
Dataset load_dataset(const std::filesystem::path& csv_path);

/// Raw trace file: "QRTRACE1", float64 sample rate, uint64 length, then
/// little-endian float64 samples.
std::string encode_raw_trace(const RawTrace& trace);
RawTrace decode_raw_trace(const std::string& bytes);
void save_raw_trace(const std::filesystem::path& path, const RawTrace& trace);
RawTrace load_raw_trace(const std::filesystem::path& path);

}  // namespace qhmm

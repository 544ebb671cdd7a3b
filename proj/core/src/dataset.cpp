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

#include "qhmm/dataset.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <cstring>
#include <map>
#include <string>

#include "qhmm/error.hpp"
#include "qhmm/file_util.hpp"
#include "qhmm/model_io.hpp"

namespace qhmm {

namespace {

constexpr std::string_view kCsvHeader = "shot_id,prepared_label,segment_index,i,q";
constexpr char kTraceMagic[8] = {'Q', 'R', 'T', 'R', 'A', 'C', 'E', '1'};

template <typename T>
T parse_field(std::string_view text, std::size_t row, const char* column) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw SchemaError("row " + std::to_string(row) + ": cannot parse " + column + " from '" +
                      std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::size_t Dataset::count_label(int label) const {
  std::size_t c = 0;
  for (const auto& s : shots) c += s.prepared_label == label ? 1 : 0;
  return c;
}

std::vector<ObservationSequence> Dataset::sequences() const {
  std::vector<ObservationSequence> out;
  out.reserve(shots.size());
  for (const auto& s : shots) out.push_back(s.obs);
  return out;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(shots.size());
  for (const auto& s : shots) out.push_back(s.prepared_label);
  return out;
}

Dataset Dataset::truncated(std::size_t n_segments) const {
  Dataset out = *this;
  for (auto& s : out.shots) {
    s.obs = s.obs.prefix(n_segments);
    if (s.true_states.size() > n_segments) s.true_states.resize(n_segments);
  }
  return out;
}

Dataset Dataset::dropped_front(std::size_t n_segments) const {
  Dataset out = *this;
  for (auto& s : out.shots) {
    if (n_segments >= s.obs.size()) throw InputError("dropped_front: would remove every segment of a shot");
    s.obs = s.obs.slice(n_segments, s.obs.size() - n_segments);
    if (!s.true_states.empty()) {
      s.true_states.erase(s.true_states.begin(), s.true_states.begin() + static_cast<std::ptrdiff_t>(n_segments));
    }
  }
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out = *this;
  out.shots.clear();
  out.shots.reserve(indices.size());
  for (std::size_t k : indices) out.shots.push_back(shots.at(k));
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  out.reserve(data.shots.size() * (data.shots.empty() ? 0 : data.shots[0].obs.size()) * 48 + 64);
  out += kCsvHeader;
  out += '\n';
  for (const auto& shot : data.shots) {
    const std::string prefix = std::to_string(shot.shot_id) + ',' + std::to_string(shot.prepared_label) + ',';
    for (std::size_t k = 0; k < shot.obs.size(); ++k) {
      out += prefix;
      out += std::to_string(k);
      out += ',';
      out += format_double(shot.obs[k].i);
      out += ',';
      out += format_double(shot.obs[k].q);
      out += '\n';
    }
  }
  return out;
}

namespace {

nlohmann::json sidecar_json(const Dataset& data) {
  return {{"dt_seconds", data.dt_seconds},
          {"if_freq_hz", data.if_freq_hz},
          {"sample_rate_hz", data.sample_rate_hz},
          {"provenance", data.provenance},
          {"seed", data.seed}};
}

}  // namespace

void save_dataset(const std::filesystem::path& csv_path, const Dataset& data) {
  write_file_atomic(csv_path, dataset_to_csv(data));
  write_file_atomic(sidecar_path(csv_path), dump_json(sidecar_json(data)));
}

Dataset dataset_from_csv(const std::string& csv, const nlohmann::json& sidecar) {
  Dataset data;
  if (!sidecar.is_object() || !sidecar.contains("dt_seconds") || !sidecar.at("dt_seconds").is_number()) {
    throw SchemaError("dataset sidecar: missing numeric 'dt_seconds'");
  }
  data.dt_seconds = sidecar.at("dt_seconds").get<double>();
  if (!(data.dt_seconds > 0.0)) throw SchemaError("dataset sidecar: dt_seconds must be positive");
  data.if_freq_hz = sidecar.value("if_freq_hz", data.if_freq_hz);
  data.sample_rate_hz = sidecar.value("sample_rate_hz", data.sample_rate_hz);
  data.provenance = sidecar.value("provenance", nlohmann::json::object());
  data.seed = sidecar.value("seed", std::uint64_t{0});

  std::string_view rest(csv);
  std::size_t row = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    if (rest.empty()) return std::nullopt;
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view() : rest.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };
  auto header = next_line();
  if (!header || *header != kCsvHeader) {
    throw SchemaError("row 1: expected header '" + std::string(kCsvHeader) + "'");
  }
  row = 1;

  std::vector<IqPoint> points;
  std::size_t current_id = 0;
  int current_label = 0;
  bool open = false;
  auto flush = [&] {
    if (open) data.shots.push_back({current_id, current_label, ObservationSequence(std::move(points), data.dt_seconds), {}});
    points.clear();
  };
  std::map<std::size_t, bool> seen;
  while (auto line = next_line()) {
    ++row;
    if (line->empty()) continue;
    std::string_view fields[5];
    std::size_t nf = 0;
    std::string_view l = *line;
    while (nf < 5) {
      const auto comma = l.find(',');
      fields[nf++] = l.substr(0, comma);
      if (comma == std::string_view::npos) {
        l = {};
        break;
      }
      l = l.substr(comma + 1);
      if (nf == 5) {
        throw SchemaError("row " + std::to_string(row) + ": too many columns");
      }
    }
    if (nf != 5) throw SchemaError("row " + std::to_string(row) + ": expected 5 columns, found " + std::to_string(nf));
    const auto id = parse_field<std::size_t>(fields[0], row, "shot_id");
    const auto label = parse_field<int>(fields[1], row, "prepared_label");
    const auto seg = parse_field<std::size_t>(fields[2], row, "segment_index");
    const auto vi = parse_field<double>(fields[3], row, "i");
    const auto vq = parse_field<double>(fields[4], row, "q");
    if (!std::isfinite(vi) || !std::isfinite(vq)) throw SchemaError("row " + std::to_string(row) + ": non-finite IQ value");
    if (!open || id != current_id) {
      flush();
      if (seen.count(id)) throw SchemaError("row " + std::to_string(row) + ": shot " + std::to_string(id) + " is not contiguous");
      seen[id] = true;
      current_id = id;
      current_label = label;
      open = true;
    }
    if (label != current_label) throw SchemaError("row " + std::to_string(row) + ": prepared_label changes within shot");
    if (seg != points.size()) {
      throw SchemaError("row " + std::to_string(row) + ": segment_index " + std::to_string(seg) + ", expected " +
                        std::to_string(points.size()));
    }
    points.push_back({vi, vq});
  }
  flush();
  if (data.shots.empty()) throw SchemaError("dataset contains no shots");
  return data;
}

Dataset load_dataset(const std::filesystem::path& csv_path) {
  const auto meta_path = sidecar_path(csv_path);
  const auto sidecar = parse_json(read_file(meta_path), meta_path.string());
  return dataset_from_csv(read_file(csv_path), sidecar);
}

std::string encode_raw_trace(const RawTrace& trace) {
  static_assert(sizeof(double) == 8);
  std::string out(8 + 16 + 8 * trace.samples.size(), '\0');
  std::memcpy(out.data(), kTraceMagic, 8);
  auto put_le = [&](std::size_t offset, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out[offset + static_cast<std::size_t>(b)] = static_cast<char>((v >> (8 * b)) & 0xFF);
  };
  auto bits = [](double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    return u;
  };
  put_le(8, bits(trace.sample_rate_hz));
  put_le(16, trace.samples.size());
  for (std::size_t k = 0; k < trace.samples.size(); ++k) put_le(24 + 8 * k, bits(trace.samples[k]));
  return out;
}

RawTrace decode_raw_trace(const std::string& bytes) {
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kTraceMagic, 8) != 0) {
    throw SchemaError("raw trace: missing QRTRACE1 header");
  }
  auto get_le = [&](std::size_t offset) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(b)])) << (8 * b);
    }
    return v;
  };
  auto as_double = [](std::uint64_t u) {
    double d;
    std::memcpy(&d, &u, 8);
    return d;
  };
  RawTrace trace;
  trace.sample_rate_hz = as_double(get_le(8));
  const std::uint64_t n = get_le(16);
  if (bytes.size() != 24 + 8 * n) throw SchemaError("raw trace: length field does not match file size");
  trace.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) trace.samples[k] = as_double(get_le(24 + 8 * k));
  return trace;
}

void save_raw_trace(const std::filesystem::path& path, const RawTrace& trace) {
  write_file_atomic(path, encode_raw_trace(trace));
}

RawTrace load_raw_trace(const std::filesystem::path& path) { return decode_raw_trace(read_file(path)); }

}  // namespace qhmm

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

#include <filesystem>

#include "json.hpp"
#include "qhmm/hmm.hpp"

namespace qhmm {

/// {"kind": "hmm", "schema_version": 1, n_states, dt_seconds, priors[],
///  trans[][], emissions[{mean_i, mean_q, cov[[..]]}]}
nlohmann::json to_json(const HmmModel& model);
/// Throws SchemaError on missing or ill-typed fields; InputError when the
/// values violate model invariants.
HmmModel hmm_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const Gaussian2D& g);
Gaussian2D gaussian_from_json(const nlohmann::json& doc);

void save_model(const std::filesystem::path& path, const HmmModel& model);
HmmModel load_model(const std::filesystem::path& path);

/// Two-space indented JSON. Doubles use the shortest representation that
/// parses back to the same value.
std::string dump_json(const nlohmann::json& doc);
nlohmann::json parse_json(const std::string& text, const std::string& what);

}  // namespace qhmm

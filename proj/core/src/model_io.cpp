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

#include "qhmm/model_io.hpp"

#include <algorithm>
#include <string>

#include "qhmm/error.hpp"
#include "qhmm/file_util.hpp"

namespace qhmm {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("field '") + key + "' has the wrong type: " + e.what());
  }
}

}  // namespace

json to_json(const Gaussian2D& g) {
  return {{"mean_i", g.mean().i},
          {"mean_q", g.mean().q},
          {"cov", {{g.cov().ii, g.cov().iq}, {g.cov().iq, g.cov().qq}}}};
}

Gaussian2D gaussian_from_json(const json& doc) {
  const auto cov = field<std::vector<std::vector<double>>>(doc, "cov");
  if (cov.size() != 2 || cov[0].size() != 2 || cov[1].size() != 2) {
    throw SchemaError("emission 'cov' must be a 2x2 matrix");
  }
  if (cov[0][1] != cov[1][0]) throw InputError("emission covariance is not symmetric");
  return Gaussian2D({field<double>(doc, "mean_i"), field<double>(doc, "mean_q")},
                    {cov[0][0], cov[0][1], cov[1][1]});
}

json to_json(const HmmModel& model) {
  const std::size_t n = model.n_states();
  json trans = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < n; ++j) row.push_back(model.trans(i, j));
    trans.push_back(row);
  }
  json emissions = json::array();
  for (const auto& g : model.emissions()) emissions.push_back(to_json(g));
  return {{"kind", "hmm"},
          {"schema_version", 1},
          {"n_states", n},
          {"dt_seconds", model.dt_seconds()},
          {"priors", std::vector<double>(model.priors().begin(), model.priors().end())},
          {"trans", trans},
          {"emissions", emissions}};
}

HmmModel hmm_from_json(const json& doc) {
  if (doc.contains("kind") && field<std::string>(doc, "kind") != "hmm") {
    throw SchemaError("expected kind 'hmm', found '" + field<std::string>(doc, "kind") + "'");
  }
  const auto n = field<std::size_t>(doc, "n_states");
  const auto priors = field<std::vector<double>>(doc, "priors");
  const auto trans = field<std::vector<std::vector<double>>>(doc, "trans");
  if (!doc.contains("emissions") || !doc.at("emissions").is_array()) throw SchemaError("missing array 'emissions'");
  if (priors.size() != n || trans.size() != n || doc.at("emissions").size() != n) {
    throw SchemaError("model arrays do not match n_states = " + std::to_string(n));
  }
  std::vector<double> flat;
  for (const auto& row : trans) {
    if (row.size() != n) throw SchemaError("transition matrix row has wrong length");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  std::vector<Gaussian2D> emissions;
  for (const auto& e : doc.at("emissions")) emissions.push_back(gaussian_from_json(e));
  return HmmModel(priors, std::move(flat), std::move(emissions), field<double>(doc, "dt_seconds"));
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < end; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SchemaError(what + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON: " + e.what());
  }
}

void save_model(const std::filesystem::path& path, const HmmModel& model) {
  write_file_atomic(path, dump_json(to_json(model)));
}

HmmModel load_model(const std::filesystem::path& path) {
  return hmm_from_json(parse_json(read_file(path), path.string()));
}

}  // namespace qhmm

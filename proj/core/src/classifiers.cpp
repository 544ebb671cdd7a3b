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

#include "qhmm/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qhmm/error.hpp"
#include "qhmm/file_util.hpp"
#include "qhmm/model_io.hpp"
#include "qhmm/signal.hpp"

namespace qhmm {

using nlohmann::json;

HmmClassifier::HmmClassifier(const HmmModel& trained) : model_(trained.with_uniform_priors()) {}

ShotClassification HmmClassifier::classify(const ObservationSequence& shot) const {
  const StatePosterior post = forward_backward(model_, shot);
  ShotClassification out;
  const std::size_t n = post.n_states;
  for (std::size_t d = 1; d < n; ++d) {
    if (post.at(0, d) > post.at(0, out.assigned_label)) out.assigned_label = d;
  }
  out.start_probability = post.at(0, out.assigned_label);
  out.transition_detected = !post.transition_indices.empty();
  if (out.transition_detected) out.transition_index = post.transition_indices.front();
  return out;
}

ShotClassification HmmClassifier::classify(const ObservationSequence& shot, double t_int_s) const {
  const std::size_t n = segments_in(t_int_s, model_.dt_seconds());
  if (n == 0) throw InputError("hmm_classify: integration time shorter than one segment");
  return classify(n >= shot.size() ? shot : shot.prefix(n));
}

ShotClassification hmm_classify(const HmmModel& model, const ObservationSequence& shot, double t_int_s) {
  return HmmClassifier(model).classify(shot, t_int_s);
}

MvgClassifier mvg_train(std::span<const LabeledPoint> points) {
  if (points.empty()) throw InputError("mvg_train: no training points");
  int max_label = -1;
  for (const auto& p : points) {
    if (p.label < 0) throw InputError("mvg_train: labels must be non-negative");
    max_label = std::max(max_label, p.label);
  }
  const auto k = static_cast<std::size_t>(max_label + 1);
  if (k < 2) throw InputError("mvg_train: need at least two classes");
  std::vector<double> n(k, 0.0), si(k, 0.0), sq(k, 0.0);
  for (const auto& p : points) {
    const auto c = static_cast<std::size_t>(p.label);
    n[c] += 1.0;
    si[c] += p.point.i;
    sq[c] += p.point.q;
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (n[c] < 3.0) throw InputError("mvg_train: class " + std::to_string(c) + " has fewer than 3 points");
    si[c] /= n[c];
    sq[c] /= n[c];
  }
  std::vector<double> cii(k, 0.0), ciq(k, 0.0), cqq(k, 0.0);
  for (const auto& p : points) {
    const auto c = static_cast<std::size_t>(p.label);
    const double di = p.point.i - si[c];
    const double dq = p.point.q - sq[c];
    cii[c] += di * di;
    ciq[c] += di * dq;
    cqq[c] += dq * dq;
  }
  std::vector<IqPoint> all;
  all.reserve(points.size());
  for (const auto& p : points) all.push_back(p.point);
  const double floor = variance_floor(all);

  MvgClassifier clf;
  for (std::size_t c = 0; c < k; ++c) {
    Cov2 cov{cii[c] / (n[c] - 1.0), ciq[c] / (n[c] - 1.0), cqq[c] / (n[c] - 1.0)};
    if (cov.eigenvalues()[0] < floor) {
      cov.ii += floor;
      cov.qq += floor;
      clf.regularized = true;
    }
    clf.classes.emplace_back(IqPoint{si[c], sq[c]}, cov);
  }
  clf.class_priors.assign(k, 1.0 / static_cast<double>(k));
  return clf;
}

MvgDecision mvg_classify(const MvgClassifier& clf, IqPoint point) {
  const std::size_t k = clf.classes.size();
  std::vector<double> logp(k);
  std::size_t best = 0;
  for (std::size_t c = 0; c < k; ++c) {
    logp[c] = std::log(clf.class_priors[c]) + clf.classes[c].log_pdf(point);
    if (logp[c] > logp[best]) best = c;
  }
  double denom = 0.0;
  for (std::size_t c = 0; c < k; ++c) denom += std::exp(logp[c] - logp[best]);
  return {static_cast<int>(best), 1.0 / denom};
}

SvmDecision svm_classify(const SvmClassifier& clf, IqPoint point) {
  const double m = clf.decision(point);
  return {m > 0.0 ? clf.positive_label : clf.negative_label, m};
}

Rejection reject_low_probability(std::span<const double> confidences, double threshold) {
  Rejection r;
  for (std::size_t k = 0; k < confidences.size(); ++k) {
    if (confidences[k] >= threshold) r.accepted.push_back(k);
  }
  r.efficiency = confidences.empty() ? 0.0
                                     : static_cast<double>(r.accepted.size()) / static_cast<double>(confidences.size());
  return r;
}

Rejection reject_low_probability(std::span<const ShotClassification> results, double threshold) {
  std::vector<double> conf;
  conf.reserve(results.size());
  for (const auto& r : results) conf.push_back(r.start_probability);
  return reject_low_probability(conf, threshold);
}

json to_json(const MvgClassifier& clf) {
  json classes = json::array();
  for (const auto& g : clf.classes) classes.push_back(to_json(g));
  return {{"kind", "mvg"},
          {"schema_version", 1},
          {"classes", classes},
          {"class_priors", clf.class_priors},
          {"regularized", clf.regularized}};
}

json to_json(const SvmClassifier& clf) {
  return {{"kind", "svm"},
          {"schema_version", 1},
          {"weights", {clf.weights[0], clf.weights[1]}},
          {"bias", clf.bias},
          {"c_param", clf.c_param},
          {"feature_mean", {clf.feature_mean[0], clf.feature_mean[1]}},
          {"feature_std", {clf.feature_std[0], clf.feature_std[1]}},
          {"labels", {clf.negative_label, clf.positive_label}}};
}

json to_json(const AnyClassifier& clf) {
  return std::visit([](const auto& c) { return to_json(c); }, clf);
}

namespace {

std::vector<double> pair_field(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_array() || doc.at(key).size() != 2) {
    throw SchemaError(std::string("svm: field '") + key + "' must be a 2-element array");
  }
  return doc.at(key).get<std::vector<double>>();
}

}  // namespace

AnyClassifier classifier_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("kind") || !doc.at("kind").is_string()) {
    throw SchemaError("classifier: missing string field 'kind'");
  }
  const auto kind = doc.at("kind").get<std::string>();
  try {
    if (kind == "hmm") return hmm_from_json(doc);
    if (kind == "mvg") {
      MvgClassifier clf;
      for (const auto& g : doc.at("classes")) clf.classes.push_back(gaussian_from_json(g));
      clf.class_priors = doc.at("class_priors").get<std::vector<double>>();
      clf.regularized = doc.value("regularized", false);
      if (clf.class_priors.size() != clf.classes.size() || clf.classes.size() < 2) {
        throw SchemaError("mvg: class_priors must match classes (>= 2)");
      }
      return clf;
    }
    if (kind == "svm") {
      SvmClassifier clf;
      const auto w = pair_field(doc, "weights");
      const auto mean = pair_field(doc, "feature_mean");
      const auto sd = pair_field(doc, "feature_std");
      clf.weights[0] = w[0];
      clf.weights[1] = w[1];
      clf.feature_mean[0] = mean[0];
      clf.feature_mean[1] = mean[1];
      clf.feature_std[0] = sd[0];
      clf.feature_std[1] = sd[1];
      if (!(sd[0] > 0.0 && sd[1] > 0.0)) throw SchemaError("svm: feature_std must be positive");
      clf.bias = doc.at("bias").get<double>();
      clf.c_param = doc.value("c_param", 1.0);
      if (doc.contains("labels")) {
        const auto labels = doc.at("labels").get<std::vector<int>>();
        if (labels.size() != 2) throw SchemaError("svm: labels must have two entries");
        clf.negative_label = labels[0];
        clf.positive_label = labels[1];
      }
      clf.converged = true;
      return clf;
    }
  } catch (const json::exception& e) {
    throw SchemaError("classifier '" + kind + "': " + e.what());
  }
  throw SchemaError("unknown classifier kind '" + kind + "' (expected hmm, mvg or svm)");
}

AnyClassifier load_classifier(const std::filesystem::path& path) {
  return classifier_from_json(parse_json(read_file(path), path.string()));
}

void save_classifier(const std::filesystem::path& path, const AnyClassifier& clf) {
  write_file_atomic(path, dump_json(to_json(clf)));
}

}  // namespace qhmm

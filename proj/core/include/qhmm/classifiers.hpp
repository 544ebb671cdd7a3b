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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "json.hpp"
#include "qhmm/gaussian.hpp"
#include "qhmm/hmm.hpp"

namespace qhmm {

struct ShotClassification {
  std::size_t assigned_label = 0;
  double start_probability = 0.0;  ///< max over states of the starting-state posterior
  bool transition_detected = false;
  std::optional<std::size_t> transition_index;  ///< first index where the decoded path changes
};

/// Starting-state classifier over a trained HMM. Priors are replaced by a
/// uniform distribution at construction.
class HmmClassifier {
 public:
  explicit HmmClassifier(const HmmModel& trained);

  const HmmModel& model() const noexcept { return model_; }
  /// Classifies the first floor(t_int / dt) segments of shot (the whole shot
  /// if it is shorter). Throws InputError if that is zero segments or dt differs.
  ShotClassification classify(const ObservationSequence& shot, double t_int_s) const;
  ShotClassification classify(const ObservationSequence& shot) const;

 private:
  HmmModel model_;
};

ShotClassification hmm_classify(const HmmModel& model, const ObservationSequence& shot, double t_int_s);

struct LabeledPoint {
  IqPoint point;
  int label = 0;
};

/// Per-class Gaussian (quadratic discriminant) classifier.
struct MvgClassifier {
  std::vector<Gaussian2D> classes;  ///< index = label
  std::vector<double> class_priors;
  bool regularized = false;         ///< a singular covariance was lifted by the variance floor
};

struct MvgDecision {
  int label = 0;
  double posterior = 0.0;
};

/// Labels must be 0..K-1 with at least three points each. Sample covariance
/// uses the n-1 denominator.
MvgClassifier mvg_train(std::span<const LabeledPoint> points);
MvgDecision mvg_classify(const MvgClassifier& clf, IqPoint point);

/// Linear soft-margin SVM on standardized features.
struct SvmClassifier {
  double weights[2] = {0.0, 0.0};
  double bias = 0.0;
  double c_param = 1.0;
  double feature_mean[2] = {0.0, 0.0};
  double feature_std[2] = {1.0, 1.0};
  int negative_label = 0;
  int positive_label = 1;
  double duality_gap = 0.0;
  std::size_t iterations = 0;
  bool converged = false;

  double decision(IqPoint point) const noexcept {
    const double x0 = (point.i - feature_mean[0]) / feature_std[0];
    const double x1 = (point.q - feature_mean[1]) / feature_std[1];
    return weights[0] * x0 + weights[1] * x1 + bias;
  }
};

struct SvmOptions {
  double gap_tol = 1e-6;  ///< relative duality gap, (P - D) / max(1, |P|)
  std::size_t max_iter = 0;  ///< 0 selects 200 x n
};

struct SvmDecision {
  int label = 0;
  double margin = 0.0;
};

SvmClassifier svm_train(std::span<const LabeledPoint> points, double c_param = 1.0, const SvmOptions& options = {});
/// Points on the hyperplane get the lower label.
SvmDecision svm_classify(const SvmClassifier& clf, IqPoint point);

struct Rejection {
  std::vector<std::size_t> accepted;  ///< indices into the input
  double efficiency = 0.0;            ///< |accepted| / |results|
};

/// Keeps shots with start_probability >= threshold.
Rejection reject_low_probability(std::span<const ShotClassification> results, double threshold);
/// Same rule over raw confidence values (e.g. MVG posteriors).
Rejection reject_low_probability(std::span<const double> confidences, double threshold);

// Serialization; every document carries "kind" and "schema_version".
using AnyClassifier = std::variant<HmmModel, MvgClassifier, SvmClassifier>;

nlohmann::json to_json(const MvgClassifier& clf);
nlohmann::json to_json(const SvmClassifier& clf);
nlohmann::json to_json(const AnyClassifier& clf);
/// Dispatches on "kind"; unknown kinds throw SchemaError.
AnyClassifier classifier_from_json(const nlohmann::json& doc);
AnyClassifier load_classifier(const std::filesystem::path& path);
void save_classifier(const std::filesystem::path& path, const AnyClassifier& clf);

}  // namespace qhmm
